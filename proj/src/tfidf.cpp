#include "convlat/tfidf.hpp"

#include <cmath>
#include <unordered_set>

namespace convlat {

double TfIdfModel::idf(TokenId token) const {
  auto it = df.find(token);
  long d = (it == df.end()) ? 0 : it->second;
  return std::log((1.0 + static_cast<double>(num_docs)) /
                  (1.0 + static_cast<double>(d))) +
         1.0;
}

TfIdfModel fit_tfidf(const std::vector<std::vector<TokenId>>& documents) {
  if (documents.empty())
    throw EmptyCorpusError("tf-idf requires at least one document");
  TfIdfModel model;
  model.num_docs = static_cast<long>(documents.size());
  for (const auto& doc : documents) {
    std::unordered_set<TokenId> seen;
    for (TokenId t : doc)
      if (t != kEpsToken) seen.insert(t);
    for (TokenId t : seen) ++model.df[t];
  }
  return model;
}

double tfidf_cosine(const TfIdfModel& model, const std::vector<TokenId>& a,
                    const std::vector<TokenId>& b) {
  std::unordered_map<TokenId, double> va, vb;
  for (TokenId t : a)
    if (t != kEpsToken) va[t] += 1.0;
  for (TokenId t : b)
    if (t != kEpsToken) vb[t] += 1.0;
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [t, tf] : va) {
    tf *= model.idf(t);
    na += tf * tf;
  }
  for (auto& [t, tf] : vb) {
    tf *= model.idf(t);
    nb += tf * tf;
  }
  for (const auto& [t, wa] : va) {
    auto it = vb.find(t);
    if (it != vb.end()) dot += wa * it->second;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace convlat
