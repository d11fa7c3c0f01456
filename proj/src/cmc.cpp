#include "ps2man/metrics.hpp"

#include <algorithm>
#include <map>

namespace ps2man {

CmcCurve cmc(const std::vector<LabeledFeature>& probes,
             const std::vector<LabeledFeature>& gallery) {
  if (probes.empty() || gallery.empty())
    throw std::invalid_argument("cmc: empty probe or gallery set");

  std::map<std::string, size_t> gallery_index;
  for (size_t i = 0; i < gallery.size(); ++i) {
    if (!gallery_index.emplace(gallery[i].identity, i).second)
      throw std::invalid_argument("cmc: duplicate gallery identity '" +
                                  gallery[i].identity + "'");
  }

  const size_t g = gallery.size();
  std::vector<size_t> rank_hits(g, 0);
  for (const auto& probe : probes) {
    auto it = gallery_index.find(probe.identity);
    if (it == gallery_index.end())
      throw std::invalid_argument("cmc: probe identity '" + probe.identity +
                                  "' missing from gallery");
    std::vector<std::pair<double, size_t>> dists(g);
    for (size_t i = 0; i < g; ++i)
      dists[i] = {cosine_distance(probe.feature, gallery[i].feature), i};
    std::sort(dists.begin(), dists.end());  // ties fall back to gallery order
    for (size_t r = 0; r < g; ++r)
      if (dists[r].second == it->second) {
        ++rank_hits[r];
        break;
      }
  }

  CmcCurve curve;
  curve.rank_rates.resize(g);
  size_t cum = 0;
  for (size_t k = 0; k < g; ++k) {
    cum += rank_hits[k];
    curve.rank_rates[k] = double(cum) / double(probes.size());
  }
  return curve;
}

}  // namespace ps2man
