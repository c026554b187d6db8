#include "ranlin/blocks.hpp"

namespace ranlin {

std::vector<int> BlockStructure::coords_of(const std::vector<int>& block_ids) const {
  std::vector<int> out;
  for (int b : block_ids)
    out.insert(out.end(), coords[b].begin(), coords[b].end());
  return out;
}

std::vector<int> BlockStructure::coords_leq(int j) const {
  std::vector<int> ids;
  for (int b = 0; b <= j; ++b) ids.push_back(b);
  return coords_of(ids);
}

std::vector<int> BlockStructure::coords_geq(int j) const {
  std::vector<int> ids;
  for (int b = j; b < p(); ++b) ids.push_back(b);
  return coords_of(ids);
}

Vec embed_zero(const Vec& x, const std::vector<int>& idx) {
  Vec out = Vec::Zero(x.size());
  for (int i : idx) out[i] = x[i];
  return out;
}

Vec extract(const Vec& x, const std::vector<int>& idx) {
  Vec out(static_cast<int>(idx.size()));
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) out[i] = x[idx[i]];
  return out;
}

Vec insert(const Vec& xc, const std::vector<int>& idx, int d) {
  Vec out = Vec::Zero(d);
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) out[idx[i]] = xc[i];
  return out;
}

Mat submatrix(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  for (int r = 0; r < static_cast<int>(rows.size()); ++r)
    for (int c = 0; c < static_cast<int>(cols.size()); ++c)
      out(r, c) = m(rows[r], cols[c]);
  return out;
}

BlockProducts::BlockProducts(const std::function<Mat(long)>& full_step,
                             std::vector<int> coords, long lo, long hi)
    : coords_(std::move(coords)), lo_(lo), hi_(hi) {
  if (lo_ > 0 || hi_ < 0) throw PreconditionError("BlockProducts: window must contain 0");
  const int k = static_cast<int>(coords_.size());
  C_.assign(static_cast<std::size_t>(hi_ - lo_ + 1), Mat());
  Ci_.assign(C_.size(), Mat());
  auto slot = [&](long n) -> std::size_t { return static_cast<std::size_t>(n - lo_); };
  C_[slot(0)] = Mat::Identity(k, k);
  for (long n = 0; n < hi_; ++n) {
    const Mat step = submatrix(full_step(n), coords_, coords_);
    C_[slot(n + 1)] = step * C_[slot(n)];
  }
  for (long n = 0; n > lo_; --n) {
    const Mat step = submatrix(full_step(n - 1), coords_, coords_);
    C_[slot(n - 1)] = step.partialPivLu().solve(C_[slot(n)]);
  }
  for (std::size_t i = 0; i < C_.size(); ++i)
    Ci_[i] = C_[i].partialPivLu().inverse();
}

BlockProducts::BlockProducts(const RandomMapSystem& sys, const OmegaOrbit& orb,
                             std::vector<int> coords, long lo, long hi)
    : BlockProducts([&sys, &orb](long n) { return sys.lambda(orb.state(n)); },
                    std::move(coords), lo, hi) {}

Mat BlockProducts::prod(long m, long at) const {
  return cumulative(at + m) * cumulative_inv(at);
}

}  // namespace ranlin
