#include "kdial/model/decoder.hpp"

#include <cmath>
#include <limits>

#include "kdial/common/error.hpp"
#include "kdial/model/transformer.hpp"
#include "kdial/numerics/kernels.hpp"

namespace kdial::model {

namespace {

template <typename T>
void layer_norm_rows(const std::vector<T>& x, std::vector<T>& y, std::size_t rows, std::size_t d, const T* g,
                     const T* b, T eps) {
  y.resize(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * d;
    T* yr = y.data() + r * d;
    T mean{0};
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<T>(d);
    const T inv_std = T{1} / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) yr[c] = (xr[c] - mean) * inv_std * g[c] + b[c];
  }
}

// out[rows x n] = in[rows x k] · w[k x n] + bias
template <typename T>
void affine(const std::vector<T>& in, std::vector<T>& out, std::size_t rows, std::size_t k, std::size_t n, const T* w,
            const T* bias) {
  out.assign(rows * n, T{0});
  for (std::size_t r = 0; r < rows; ++r) std::copy(bias, bias + n, out.begin() + r * n);
  numerics::gemm<T>(in, std::span<const T>(w, k * n), out, rows, k, n, false, false, true);
}

}  // namespace

template <typename T>
IncrementalDecoder<T>::IncrementalDecoder(const numerics::ParameterSet<T>& params, const ModelConfig& cfg)
    : cfg_(cfg) {
  check_parameter_shapes(params, cfg);
  auto p = [&](const std::string& name) { return params.value(name).data().data(); };
  tok_emb_ = p("tok_emb");
  type_emb_ = p("type_emb");
  role_emb_ = p("role_emb");
  lnf_g_ = p("ln_f.gain");
  lnf_b_ = p("ln_f.bias");
  out_w_ = p("out.w");
  out_b_ = p("out.b");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    layers_.push_back({p(pre + "ln1.gain"), p(pre + "ln1.bias"), p(pre + "attn.wq"), p(pre + "attn.wq_bias"),
                       p(pre + "attn.wk"), p(pre + "attn.wk_bias"), p(pre + "attn.wv"), p(pre + "attn.wv_bias"),
                       p(pre + "attn.wo"), p(pre + "attn.wo_bias"), p(pre + "ln2.gain"), p(pre + "ln2.bias"),
                       p(pre + "ffn.w1"), p(pre + "ffn.b1"), p(pre + "ffn.w2"), p(pre + "ffn.b2")});
  }
  cache_.resize(cfg.layers);
}

template <typename T>
void IncrementalDecoder<T>::start(const Sequence& seq) {
  for (auto& c : cache_) c = {};
  length_ = 0;
  if (seq.prefix_len == 0) return;
  if (seq.prefix_len > seq.size()) throw ValidationError("decoder: prefix_len exceeds sequence length");
  Sequence prefix;
  prefix.prefix_len = seq.prefix_len;
  prefix.tokens.assign(seq.tokens.begin(), seq.tokens.begin() + seq.prefix_len);
  prefix.types.assign(seq.types.begin(), seq.types.begin() + seq.prefix_len);
  prefix.roles.assign(seq.roles.begin(), seq.roles.begin() + seq.prefix_len);
  prefix.positions.assign(seq.positions.begin(), seq.positions.begin() + seq.prefix_len);
  prefix.loss_mask.assign(seq.prefix_len, 0);
  validate_sequence(prefix, cfg_);
  const std::size_t d = cfg_.embed_dim;
  const std::size_t n = seq.prefix_len;
  std::vector<T> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      x[i * d + c] = tok_emb_[seq.tokens[i] * d + c] + type_emb_[seq.types[i] * d + c] + role_emb_[seq.roles[i] * d + c];
    }
  }
  run(std::move(x), std::span<const std::int32_t>(seq.positions.data(), n), false);
}

template <typename T>
std::vector<T> IncrementalDecoder<T>::step(tokenizer::TokenId token, std::int32_t type, std::int32_t role,
                                           std::int32_t position) {
  if (length_ + 1 > cfg_.max_len) {
    throw ValidationError("decoder: length " + std::to_string(length_ + 1) + " exceeds max_len " +
                          std::to_string(cfg_.max_len));
  }
  if (token < 0 || static_cast<std::size_t>(token) >= cfg_.vocab_size) {
    throw RangeError("decoder: token id " + std::to_string(token) + " outside vocabulary");
  }
  if (type < 0 || static_cast<std::size_t>(type) >= cfg_.type_count || role < 0 ||
      static_cast<std::size_t>(role) >= cfg_.role_count) {
    throw RangeError("decoder: type/role id out of range");
  }
  const std::size_t d = cfg_.embed_dim;
  std::vector<T> x(d);
  for (std::size_t c = 0; c < d; ++c) x[c] = tok_emb_[token * d + c] + type_emb_[type * d + c] + role_emb_[role * d + c];
  const std::int32_t pos[1] = {position};
  return run(std::move(x), pos, true);
}

template <typename T>
std::vector<T> IncrementalDecoder<T>::run(std::vector<T> x, std::span<const std::int32_t> positions,
                                          bool want_logits) {
  const std::size_t d = cfg_.embed_dim;
  const std::size_t hd = cfg_.head_dim();
  const std::size_t m = positions.size();
  const T eps = static_cast<T>(cfg_.layer_norm_eps);
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
  const std::vector<double> pos(positions.begin(), positions.end());
  std::vector<T> h, q, k, v, attn(m * d), proj, f1;

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const auto& w = layers_[l];
    auto& cache = cache_[l];
    layer_norm_rows(x, h, m, d, w.ln1_g, w.ln1_b, eps);
    affine(h, q, m, d, d, w.wq, w.bq);
    affine(h, k, m, d, d, w.wk, w.bk);
    affine(h, v, m, d, d, w.wv, w.bv);
    // Rotate each head's slice of q and k.
    std::vector<T> slice(m * hd);
    for (std::vector<T>* mat : {&q, &k}) {
      for (std::size_t head = 0; head < cfg_.heads; ++head) {
        for (std::size_t r = 0; r < m; ++r) std::copy_n(mat->data() + r * d + head * hd, hd, slice.data() + r * hd);
        numerics::rope_rotate<T>(slice, hd, pos, cfg_.rope_base);
        for (std::size_t r = 0; r < m; ++r) std::copy_n(slice.data() + r * hd, hd, mat->data() + r * d + head * hd);
      }
    }
    cache.keys.insert(cache.keys.end(), k.begin(), k.end());
    cache.values.insert(cache.values.end(), v.begin(), v.end());
    const std::size_t total = cache.keys.size() / d;

    std::vector<T> scores(total);
    for (std::size_t head = 0; head < cfg_.heads; ++head) {
      for (std::size_t r = 0; r < m; ++r) {
        const T* qr = q.data() + r * d + head * hd;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < total; ++j) {
          const T* kj = cache.keys.data() + j * d + head * hd;
          T s{0};
          for (std::size_t c = 0; c < hd; ++c) s += qr[c] * kj[c];
          scores[j] = s * inv_sqrt;
          mx = std::max(mx, scores[j]);
        }
        T z{0};
        for (std::size_t j = 0; j < total; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          z += scores[j];
        }
        T* out = attn.data() + r * d + head * hd;
        std::fill_n(out, hd, T{0});
        for (std::size_t j = 0; j < total; ++j) {
          const T p = scores[j] / z;
          const T* vj = cache.values.data() + j * d + head * hd;
          for (std::size_t c = 0; c < hd; ++c) out[c] += p * vj[c];
        }
      }
    }
    affine(attn, proj, m, d, d, w.wo, w.bo);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];
    layer_norm_rows(x, h, m, d, w.ln2_g, w.ln2_b, eps);
    affine(h, f1, m, d, cfg_.ffn_dim, w.w1, w.b1);
    for (auto& e : f1) e = numerics::gelu_tanh(e);
    affine(f1, proj, m, cfg_.ffn_dim, d, w.w2, w.b2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];
  }
  length_ += m;
  if (!want_logits) return {};
  // Only the last row's logits are needed.
  std::vector<T> last(x.end() - static_cast<std::ptrdiff_t>(d), x.end());
  layer_norm_rows(last, h, 1, d, lnf_g_, lnf_b_, eps);
  std::vector<T> logits;
  affine(h, logits, 1, d, cfg_.vocab_size, out_w_, out_b_);
  return logits;
}

template class IncrementalDecoder<float>;
template class IncrementalDecoder<double>;

}  // namespace kdial::model
