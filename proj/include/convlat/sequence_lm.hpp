#ifndef CONVLAT_SEQUENCE_LM_HPP
#define CONVLAT_SEQUENCE_LM_HPP

#include <memory>
#include <utility>

#include "convlat/ngram_lm.hpp"
#include "convlat/rnnlm.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

/// Deterministic on-demand acceptor view of a language model: an opaque state
/// plus a per-word cost.  States are immutable snapshots shared by handle.
class SequenceLm {
 public:
  using State = std::shared_ptr<const void>;
  virtual ~SequenceLm() = default;

  /// State conditioned on <s>.
  virtual State begin() const = 0;
  /// (-ln P(word | state), advanced state).  Epsilon is free and stays put.
  virtual std::pair<double, State> step(const State& state,
                                        TokenId word) const = 0;
  /// -ln P(</s> | state).
  virtual double end_cost(const State& state) const = 0;
};

class NgramSequenceLm final : public SequenceLm {
 public:
  explicit NgramSequenceLm(const NgramModel& model) : model_(&model) {}
  State begin() const override;
  std::pair<double, State> step(const State& state,
                                TokenId word) const override;
  double end_cost(const State& state) const override;

 private:
  const NgramModel* model_;
};

class RnnSequenceLm final : public SequenceLm {
 public:
  explicit RnnSequenceLm(const RnnLm<float>& model) : model_(&model) {}
  State begin() const override;
  std::pair<double, State> step(const State& state,
                                TokenId word) const override;
  double end_cost(const State& state) const override;

 private:
  const RnnLm<float>* model_;
};

/// The cost edit applied during rescoring: remove the first-pass n-gram score,
/// mix in the replacement score.  Per-word delta = weight·add − subtract (the
/// remaining (1−weight) share of the replacement is simply dropped, not
/// re-filled from anywhere); weight 1 is pure replacement.
class DifferenceLm {
 public:
  struct State {
    NgramStateId sub;
    SequenceLm::State add;
  };

  DifferenceLm(const NgramModel* subtract, const SequenceLm* add,
               double weight = 1.0)
      : subtract_(subtract), add_(add), weight_(weight) {}

  State begin() const;
  std::pair<double, State> step_delta(const State& state, TokenId word) const;
  double end_delta(const State& state) const;

  const NgramModel* subtract_model() const { return subtract_; }
  const SequenceLm* add_model() const { return add_; }
  double weight() const { return weight_; }

 private:
  const NgramModel* subtract_;
  const SequenceLm* add_;
  double weight_;
};

}  // namespace convlat

#endif  // CONVLAT_SEQUENCE_LM_HPP
