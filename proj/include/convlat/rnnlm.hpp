#ifndef CONVLAT_RNNLM_HPP
#define CONVLAT_RNNLM_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "convlat/errors.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

enum class CellKind : std::int32_t { simple = 0, gated = 1 };

struct RnnLmConfig {
  int embed_dim = 32;
  int hidden_dim = 64;
  int num_layers = 1;
  CellKind cell = CellKind::gated;
  int bptt = 16;
  double learning_rate = 0.1;
  int epochs = 5;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_train_ppl;
  double heldout_ppl = std::numeric_limits<double>::quiet_NaN();
};

/// Recurrent LM over the shared vocabulary.  Scalar is float for the on-disk
/// format (bit-exact round trips) and double for finite-difference checks.
/// The gated cell is an LSTM; the simple cell is an Elman tanh unit.
template <typename Scalar = float>
class RnnLm {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Per-layer hidden vectors; cell vectors used only by the gated cell.
  struct State {
    std::vector<Vector> h, c;
    bool operator==(const State& o) const {
      if (h.size() != o.h.size() || c.size() != o.c.size()) return false;
      for (size_t i = 0; i < h.size(); ++i)
        if (h[i] != o.h[i]) return false;
      for (size_t i = 0; i < c.size(); ++i)
        if (c[i] != o.c[i]) return false;
      return true;
    }
  };

  struct TensorView {
    std::string name;
    Scalar* data;
    Eigen::Index rows, cols;
    Eigen::Index size() const { return rows * cols; }
  };

  RnnLm(const RnnLmConfig& config, const Vocabulary& vocab)
      : cfg_(config), vocab_(&vocab) {
    if (cfg_.embed_dim < 1 || cfg_.hidden_dim < 1 || cfg_.num_layers < 1 ||
        cfg_.bptt < 1)
      throw ConfigError("rnnlm dimensions and bptt length must be >= 1");
    if (vocab.bos() == kNoToken || vocab.eos() == kNoToken)
      throw ConfigError("rnnlm vocabulary must contain <s> and </s>");
    const int v = vocab.size(), e = cfg_.embed_dim, h = cfg_.hidden_dim;
    const int g = gate_mult();
    embed_.resize(v, e);
    for (int l = 0; l < cfg_.num_layers; ++l) {
      int in = (l == 0) ? e : h;
      wx_.emplace_back(g * h, in);
      wh_.emplace_back(g * h, h);
      b_.push_back(Vector::Zero(g * h));
    }
    out_w_.resize(v, h);
    out_b_ = Vector::Zero(v);
    init_params(cfg_.seed);
  }

  const RnnLmConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }

  std::vector<TensorView> tensors() {
    std::vector<TensorView> out;
    out.push_back({"embed", embed_.data(), embed_.rows(), embed_.cols()});
    for (int l = 0; l < cfg_.num_layers; ++l) {
      std::string s = std::to_string(l);
      out.push_back({"wx" + s, wx_[l].data(), wx_[l].rows(), wx_[l].cols()});
      out.push_back({"wh" + s, wh_[l].data(), wh_[l].rows(), wh_[l].cols()});
      out.push_back({"bias" + s, b_[l].data(), b_[l].rows(), 1});
    }
    out.push_back({"out_w", out_w_.data(), out_w_.rows(), out_w_.cols()});
    out.push_back({"out_bias", out_b_.data(), out_b_.rows(), 1});
    return out;
  }

  long parameter_count() {
    long n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
  }

  State zero_state() const {
    State s;
    s.h.assign(cfg_.num_layers, Vector::Zero(cfg_.hidden_dim));
    if (cfg_.cell == CellKind::gated)
      s.c.assign(cfg_.num_layers, Vector::Zero(cfg_.hidden_dim));
    return s;
  }

  /// State after consuming <s>; the origin for all scoring.
  State begin_state() const { return advance(zero_state(), vocab_->bos()); }

  /// Advances one step without computing the output distribution.
  State advance(const State& state, TokenId word) const {
    check_token(word);
    State next = state;
    Vector x = embed_.row(word).transpose();
    for (int l = 0; l < cfg_.num_layers; ++l) {
      Vector z = wx_[l] * x + wh_[l] * state.h[l] + b_[l];
      if (cfg_.cell == CellKind::simple) {
        next.h[l] = z.array().tanh().matrix();
      } else {
        const int h = cfg_.hidden_dim;
        Vector i = sigmoid(z.segment(0, h));
        Vector f = sigmoid(z.segment(h, h));
        Vector g = z.segment(2 * h, h).array().tanh().matrix();
        Vector o = sigmoid(z.segment(3 * h, h));
        next.c[l] = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
        next.h[l] = o.cwiseProduct(next.c[l].array().tanh().matrix());
      }
      x = next.h[l];
    }
    return next;
  }

  /// Full log-probability vector of the next word given `state`.
  Vector log_probs(const State& state) const {
    Vector logits = out_w_ * state.h.back() + out_b_;
    Scalar m = logits.maxCoeff();
    Scalar logz = m + std::log((logits.array() - m).exp().sum());
    return (logits.array() - logz).matrix();
  }

  /// Cost of `word` given `state` plus the advanced state.  Epsilon is a
  /// zero-length no-op, matching the lattice convention.
  std::pair<double, State> step(const State& state, TokenId word) const {
    if (word == kEpsToken) return {0.0, state};
    check_token(word);
    double cost = -static_cast<double>(log_probs(state)[word]);
    return {cost, advance(state, word)};
  }

  /// State after <s> followed by `words` (epsilons skipped).
  State history_state(const std::vector<TokenId>& words) const {
    State s = begin_state();
    for (TokenId w : words)
      if (w != kEpsToken) s = advance(s, w);
    return s;
  }

  double score_sentence(const std::vector<TokenId>& words) const {
    State s = begin_state();
    double total = 0.0;
    for (TokenId w : words) {
      auto [cost, next] = step(s, w);
      total += cost;
      s = std::move(next);
    }
    total += -static_cast<double>(log_probs(s)[vocab_->eos()]);
    return total;
  }

  /// exp(mean step cost) over the corpus; sequences are independent.
  double perplexity(const std::vector<std::vector<TokenId>>& corpus) const {
    double total = 0.0;
    long count = 0;
    for (const auto& seq : corpus) {
      total += score_sentence(seq);
      count += static_cast<long>(non_eps_count(seq)) + 1;  // + </s>
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::exp(total / static_cast<double>(count));
  }

  /// SGD with truncated BPTT.  Hidden state carries across every token of one
  /// corpus line (tags included) and resets between lines.
  TrainReport train(const std::vector<std::vector<TokenId>>& corpus,
                    const std::vector<std::vector<TokenId>>& heldout = {}) {
    TrainReport report;
    Grads grads = make_grads();
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      double loss_sum = 0.0;
      long target_count = 0;
      for (const auto& seq : corpus) {
        auto [inputs, targets] = wrap_sequence(seq);
        State state = zero_state();
        for (size_t pos = 0; pos < targets.size();
             pos += static_cast<size_t>(cfg_.bptt)) {
          size_t len =
              std::min<size_t>(static_cast<size_t>(cfg_.bptt),
                               targets.size() - pos);
          zero_grads(grads);
          auto [loss, next] = chunk_forward_backward(
              state, &inputs[pos], &targets[pos], len, &grads);
          if (!std::isfinite(loss))
            throw NumericalDivergenceError(
                "training loss is not finite; lower the learning rate or "
                "check the corpus for degenerate sequences");
          apply_sgd(grads);
          loss_sum += loss;
          target_count += static_cast<long>(len);
          state = std::move(next);
        }
      }
      report.epoch_train_ppl.push_back(
          target_count ? std::exp(loss_sum / target_count)
                       : std::numeric_limits<double>::quiet_NaN());
    }
    if (!heldout.empty()) report.heldout_ppl = perplexity(heldout);
    return report;
  }

  /// Loss over one wrapped sequence in a single unbounded chunk; analytic
  /// gradients come back flat, in tensors() order.  Finite-difference checks
  /// drive this directly.
  double loss_and_grads(const std::vector<TokenId>& seq,
                        std::vector<Scalar>* flat_grads) {
    auto [inputs, targets] = wrap_sequence(seq);
    Grads grads = make_grads();
    zero_grads(grads);
    State state = zero_state();
    auto [loss, end] = chunk_forward_backward(state, inputs.data(),
                                              targets.data(), targets.size(),
                                              &grads);
    (void)end;
    if (flat_grads) {
      flat_grads->clear();
      auto append_m = [&](const Matrix& m) {
        flat_grads->insert(flat_grads->end(), m.data(), m.data() + m.size());
      };
      append_m(grads.embed);
      for (int l = 0; l < cfg_.num_layers; ++l) {
        append_m(grads.wx[l]);
        append_m(grads.wh[l]);
        flat_grads->insert(flat_grads->end(), grads.b[l].data(),
                           grads.b[l].data() + grads.b[l].size());
      }
      append_m(grads.out_w);
      flat_grads->insert(flat_grads->end(), grads.out_b.data(),
                         grads.out_b.data() + grads.out_b.size());
    }
    return loss;
  }

  /// Loss only, same wrapping as loss_and_grads; used by the same checks.
  double sequence_loss(const std::vector<TokenId>& seq) {
    auto [inputs, targets] = wrap_sequence(seq);
    State state = zero_state();
    auto [loss, end] = chunk_forward_backward(state, inputs.data(),
                                              targets.data(), targets.size(),
                                              nullptr);
    (void)end;
    return loss;
  }

  void save(std::ostream& out) const {
    out.write("CVLM", 4);
    write_u32(out, 1);
    write_i32(out, vocab_->size());
    write_i32(out, cfg_.embed_dim);
    write_i32(out, cfg_.hidden_dim);
    write_i32(out, cfg_.num_layers);
    write_i32(out, static_cast<std::int32_t>(cfg_.cell));
    write_i32(out, cfg_.bptt);
    write_i32(out, cfg_.epochs);
    write_f64(out, cfg_.learning_rate);
    write_u64(out, cfg_.seed);
    for (const auto& t : const_cast<RnnLm*>(this)->tensors()) {
      write_u32(out, static_cast<std::uint32_t>(t.rows));
      write_u32(out, static_cast<std::uint32_t>(t.cols));
      for (Eigen::Index i = 0; i < t.size(); ++i)
        write_f32(out, static_cast<float>(t.data[i]));
    }
  }

  static RnnLm load(std::istream& in, const Vocabulary& vocab) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CVLM", 4) != 0)
      throw FormatVersionMismatchError("bad model file magic");
    std::uint32_t version = read_u32(in);
    if (!in) throw FormatVersionMismatchError("truncated model file header");
    if (version != 1)
      throw FormatVersionMismatchError("unsupported model file version " +
                                       std::to_string(version));
    std::int32_t v = read_i32(in);
    RnnLmConfig cfg;
    cfg.embed_dim = read_i32(in);
    cfg.hidden_dim = read_i32(in);
    cfg.num_layers = read_i32(in);
    cfg.cell = static_cast<CellKind>(read_i32(in));
    cfg.bptt = read_i32(in);
    cfg.epochs = read_i32(in);
    cfg.learning_rate = read_f64(in);
    cfg.seed = read_u64(in);
    if (!in) throw ParseError("unexpected end of model file in header");
    if (v != vocab.size())
      throw ShapeMismatchError("model was saved with vocabulary size " +
                               std::to_string(v) + ", got " +
                               std::to_string(vocab.size()));
    RnnLm lm(cfg, vocab);
    for (auto& t : lm.tensors()) {
      std::uint32_t rows = read_u32(in), cols = read_u32(in);
      if (!in) throw ParseError("unexpected end of model file in " + t.name);
      if (rows != static_cast<std::uint32_t>(t.rows) ||
          cols != static_cast<std::uint32_t>(t.cols))
        throw ShapeMismatchError("tensor " + t.name + " has shape " +
                                 std::to_string(rows) + "x" +
                                 std::to_string(cols));
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        float x = read_f32(in);
        if (!in) throw ParseError("unexpected end of model file in " + t.name);
        t.data[i] = static_cast<Scalar>(x);
      }
    }
    return lm;
  }

 private:
  struct Grads {
    Matrix embed;
    std::vector<Matrix> wx, wh;
    std::vector<Vector> b;
    Matrix out_w;
    Vector out_b;
  };

  int gate_mult() const { return cfg_.cell == CellKind::gated ? 4 : 1; }

  void check_token(TokenId word) const {
    if (word < 0 || word >= vocab_->size())
      throw UnknownTokenError("token id out of range: " + std::to_string(word));
  }

  static size_t non_eps_count(const std::vector<TokenId>& seq) {
    size_t n = 0;
    for (TokenId w : seq)
      if (w != kEpsToken) ++n;
    return n;
  }

  /// [<s>, w1..wm] paired with [w1..wm, </s>], epsilons dropped.
  std::pair<std::vector<TokenId>, std::vector<TokenId>> wrap_sequence(
      const std::vector<TokenId>& seq) const {
    std::vector<TokenId> inputs{vocab_->bos()}, targets;
    for (TokenId w : seq) {
      if (w == kEpsToken) continue;
      inputs.push_back(w);
      targets.push_back(w);
    }
    targets.push_back(vocab_->eos());
    return {std::move(inputs), std::move(targets)};
  }

  static Vector sigmoid(const Eigen::Ref<const Vector>& z) {
    return (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
  }

  /// Platform-stable uniform in [-0.1, 0.1): mt19937_64 bits mapped directly,
  /// avoiding distribution implementations that differ across stdlibs.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uni = [&rng]() {
      double u = static_cast<double>(rng() >> 11) * 0x1p-53;
      return static_cast<Scalar>(u * 0.2 - 0.1);
    };
    for (auto& t : tensors()) {
      if (t.name.find("bias") != std::string::npos) continue;  // stay zero
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = uni();
    }
  }

  Grads make_grads() const {
    Grads g;
    g.embed.resize(embed_.rows(), embed_.cols());
    for (int l = 0; l < cfg_.num_layers; ++l) {
      g.wx.emplace_back(wx_[l].rows(), wx_[l].cols());
      g.wh.emplace_back(wh_[l].rows(), wh_[l].cols());
      g.b.emplace_back(b_[l].rows());
    }
    g.out_w.resize(out_w_.rows(), out_w_.cols());
    g.out_b.resize(out_b_.rows());
    return g;
  }

  static void zero_grads(Grads& g) {
    g.embed.setZero();
    for (auto& m : g.wx) m.setZero();
    for (auto& m : g.wh) m.setZero();
    for (auto& v : g.b) v.setZero();
    g.out_w.setZero();
    g.out_b.setZero();
  }

  void apply_sgd(const Grads& g) {
    double norm_sq = g.embed.squaredNorm() + g.out_w.squaredNorm() +
                     g.out_b.squaredNorm();
    for (int l = 0; l < cfg_.num_layers; ++l)
      norm_sq += g.wx[l].squaredNorm() + g.wh[l].squaredNorm() +
                 g.b[l].squaredNorm();
    double scale = cfg_.learning_rate;
    double norm = std::sqrt(norm_sq);
    if (norm > 5.0) scale *= 5.0 / norm;
    Scalar s = static_cast<Scalar>(scale);
    embed_ -= s * g.embed;
    for (int l = 0; l < cfg_.num_layers; ++l) {
      wx_[l] -= s * g.wx[l];
      wh_[l] -= s * g.wh[l];
      b_[l] -= s * g.b[l];
    }
    out_w_ -= s * g.out_w;
    out_b_ -= s * g.out_b;
  }

  /// One truncated-BPTT chunk: forward over `len` steps from `state`, summed
  /// cross-entropy loss; gradients accumulated into `grads` when non-null.
  std::pair<double, State> chunk_forward_backward(const State& state,
                                                  const TokenId* inputs,
                                                  const TokenId* targets,
                                                  size_t len, Grads* grads) {
    const int L = cfg_.num_layers, H = cfg_.hidden_dim;
    const bool gated = cfg_.cell == CellKind::gated;
    std::vector<std::vector<Vector>> h(len), c(len), z(len), tanh_c(len);
    std::vector<Vector> x0(len);
    std::vector<Vector> dlogits(len);
    double loss = 0.0;
    State cur = state;
    for (size_t t = 0; t < len; ++t) {
      check_token(inputs[t]);
      check_token(targets[t]);
      h[t].resize(L);
      z[t].resize(L);
      if (gated) {
        c[t].resize(L);
        tanh_c[t].resize(L);
      }
      x0[t] = embed_.row(inputs[t]).transpose();
      Vector x = x0[t];
      for (int l = 0; l < L; ++l) {
        z[t][l] = wx_[l] * x + wh_[l] * cur.h[l] + b_[l];
        if (!gated) {
          h[t][l] = z[t][l].array().tanh().matrix();
        } else {
          Vector i = sigmoid(z[t][l].segment(0, H));
          Vector f = sigmoid(z[t][l].segment(H, H));
          Vector g = z[t][l].segment(2 * H, H).array().tanh().matrix();
          Vector o = sigmoid(z[t][l].segment(3 * H, H));
          c[t][l] = f.cwiseProduct(cur.c[l]) + i.cwiseProduct(g);
          tanh_c[t][l] = c[t][l].array().tanh().matrix();
          h[t][l] = o.cwiseProduct(tanh_c[t][l]);
        }
        x = h[t][l];
      }
      cur.h = h[t];
      if (gated) cur.c = c[t];
      Vector logits = out_w_ * h[t][L - 1] + out_b_;
      Scalar m = logits.maxCoeff();
      Scalar logz = m + std::log((logits.array() - m).exp().sum());
      Vector logp = (logits.array() - logz).matrix();
      loss += -static_cast<double>(logp[targets[t]]);
      if (grads) {
        dlogits[t] = logp.array().exp().matrix();
        dlogits[t][targets[t]] -= Scalar(1);
      }
    }
    if (!grads) return {loss, cur};

    std::vector<Vector> dh_rec(L, Vector::Zero(H));
    std::vector<Vector> dc_rec(L, Vector::Zero(H));
    for (size_t ti = len; ti-- > 0;) {
      grads->out_w += dlogits[ti] * h[ti][L - 1].transpose();
      grads->out_b += dlogits[ti];
      Vector dtop = out_w_.transpose() * dlogits[ti];
      for (int l = L - 1; l >= 0; --l) {
        const Vector& h_prev = (ti == 0) ? state.h[l] : h[ti - 1][l];
        const Vector& x_in = (l == 0) ? x0[ti] : h[ti][l - 1];
        Vector dh = dtop + dh_rec[l];
        Vector dz;
        if (!gated) {
          dz = dh.cwiseProduct(
              (Scalar(1) - h[ti][l].array().square()).matrix());
        } else {
          const Vector& c_prev = (ti == 0) ? state.c[l] : c[ti - 1][l];
          Vector i = sigmoid(z[ti][l].segment(0, H));
          Vector f = sigmoid(z[ti][l].segment(H, H));
          Vector g = z[ti][l].segment(2 * H, H).array().tanh().matrix();
          Vector o = sigmoid(z[ti][l].segment(3 * H, H));
          Vector dc =
              dc_rec[l] +
              dh.cwiseProduct(o).cwiseProduct(
                  (Scalar(1) - tanh_c[ti][l].array().square()).matrix());
          Vector di = dc.cwiseProduct(g);
          Vector df = dc.cwiseProduct(c_prev);
          Vector dg = dc.cwiseProduct(i);
          Vector do_ = dh.cwiseProduct(tanh_c[ti][l]);
          dz.resize(4 * H);
          dz.segment(0, H) = di.cwiseProduct(i).cwiseProduct(
              (Scalar(1) - i.array()).matrix());
          dz.segment(H, H) = df.cwiseProduct(f).cwiseProduct(
              (Scalar(1) - f.array()).matrix());
          dz.segment(2 * H, H) =
              dg.cwiseProduct((Scalar(1) - g.array().square()).matrix());
          dz.segment(3 * H, H) = do_.cwiseProduct(o).cwiseProduct(
              (Scalar(1) - o.array()).matrix());
          dc_rec[l] = dc.cwiseProduct(f);
        }
        grads->wx[l] += dz * x_in.transpose();
        grads->wh[l] += dz * h_prev.transpose();
        grads->b[l] += dz;
        dh_rec[l] = wh_[l].transpose() * dz;
        dtop = wx_[l].transpose() * dz;
      }
      grads->embed.row(inputs[ti]) += dtop.transpose();
    }
    return {loss, cur};
  }

  static void write_u32(std::ostream& o, std::uint32_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_i32(std::ostream& o, std::int32_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_u64(std::ostream& o, std::uint64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_f32(std::ostream& o, float v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_f64(std::ostream& o, double v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::istream& i) {
    std::uint32_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static std::int32_t read_i32(std::istream& i) {
    std::int32_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static std::uint64_t read_u64(std::istream& i) {
    std::uint64_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static float read_f32(std::istream& i) {
    float v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static double read_f64(std::istream& i) {
    double v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }

  RnnLmConfig cfg_;
  const Vocabulary* vocab_;
  Matrix embed_;
  std::vector<Matrix> wx_, wh_;
  std::vector<Vector> b_;
  Matrix out_w_;
  Vector out_b_;
};

}  // namespace convlat

#endif  // CONVLAT_RNNLM_HPP
