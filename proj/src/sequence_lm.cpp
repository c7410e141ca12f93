#include "convlat/sequence_lm.hpp"

namespace convlat {

SequenceLm::State NgramSequenceLm::begin() const {
  return std::make_shared<NgramStateId>(model_->begin_state());
}

std::pair<double, SequenceLm::State> NgramSequenceLm::step(
    const State& state, TokenId word) const {
  const auto& s = *static_cast<const NgramStateId*>(state.get());
  auto [cost, next] = model_->score_word(s, word);
  return {cost, std::make_shared<NgramStateId>(std::move(next))};
}

double NgramSequenceLm::end_cost(const State& state) const {
  return model_->end_cost(*static_cast<const NgramStateId*>(state.get()));
}

SequenceLm::State RnnSequenceLm::begin() const {
  return std::make_shared<RnnLm<float>::State>(model_->begin_state());
}

std::pair<double, SequenceLm::State> RnnSequenceLm::step(
    const State& state, TokenId word) const {
  const auto& s = *static_cast<const RnnLm<float>::State*>(state.get());
  auto [cost, next] = model_->step(s, word);
  return {cost, std::make_shared<RnnLm<float>::State>(std::move(next))};
}

double RnnSequenceLm::end_cost(const State& state) const {
  const auto& s = *static_cast<const RnnLm<float>::State*>(state.get());
  return -static_cast<double>(
      model_->log_probs(s)[model_->vocab().eos()]);
}

DifferenceLm::State DifferenceLm::begin() const {
  State s;
  if (subtract_) s.sub = subtract_->begin_state();
  if (add_) s.add = add_->begin();
  return s;
}

std::pair<double, DifferenceLm::State> DifferenceLm::step_delta(
    const State& state, TokenId word) const {
  State next = state;
  double delta = 0.0;
  if (word == kEpsToken) return {0.0, next};
  if (subtract_) {
    auto [cost, s] = subtract_->score_word(state.sub, word);
    delta -= cost;
    next.sub = std::move(s);
  }
  if (add_) {
    auto [cost, s] = add_->step(state.add, word);
    delta += weight_ * cost;
    next.add = std::move(s);
  }
  return {delta, std::move(next)};
}

double DifferenceLm::end_delta(const State& state) const {
  double delta = 0.0;
  if (subtract_) delta -= subtract_->end_cost(state.sub);
  if (add_) delta += weight_ * add_->end_cost(state.add);
  return delta;
}

}  // namespace convlat
