#ifndef CONVLAT_TFIDF_HPP
#define CONVLAT_TFIDF_HPP

#include <unordered_map>
#include <vector>

#include "convlat/errors.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

/// Document-frequency statistics for similarity scoring between adjacent
/// hypotheses.  idf(t) = ln((1+N)/(1+df(t))) + 1, so unseen tokens still get
/// a finite positive weight.
struct TfIdfModel {
  std::unordered_map<TokenId, long> df;
  long num_docs = 0;

  double idf(TokenId token) const;
};

/// Counts document frequencies; epsilon tokens are ignored.
TfIdfModel fit_tfidf(const std::vector<std::vector<TokenId>>& documents);

/// Cosine of the tf-idf vectors of two token bags, in [0,1]; 0 when either
/// side is empty.
double tfidf_cosine(const TfIdfModel& model, const std::vector<TokenId>& a,
                    const std::vector<TokenId>& b);

}  // namespace convlat

#endif  // CONVLAT_TFIDF_HPP
