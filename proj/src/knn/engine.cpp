#include "knn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "core/error.hpp"
#include "io/envelope.hpp"

namespace nestknn {

bool hit_less(const NeighborHit& a, const NeighborHit& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.sample_id < b.sample_id;
}

double weighted_distance(std::span<const double> y, std::span<const double> x,
                         const WeightMatrix& w) {
  const int n = w.dim();
  if (static_cast<int>(y.size()) != n || static_cast<int>(x.size()) != n)
    throw ConfigError("weighted_distance: vector length does not match "
                      "weight dimension " +
                      std::to_string(n));
  if (w.storage() == WeightMatrix::Storage::Diagonal) {
    double acc = 0.0;
    const auto& diag = w.values();
    for (int i = 0; i < n; ++i) {
      const double d = y[i] - x[i];
      acc += diag[static_cast<size_t>(i)] * d * d;
    }
    return acc;
  }
  const auto& m = w.values();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double di = y[i] - x[i];
    const double* row = m.data() + static_cast<size_t>(i) * n;
    double inner = 0.0;
    for (int j = 0; j < n; ++j) inner += row[j] * (y[j] - x[j]);
    acc += di * inner;
  }
  return acc;
}

namespace {

void check_query(std::span<const double> y, int dim, int k, std::size_t size) {
  if (static_cast<int>(y.size()) != dim)
    throw DataError("query vector has " + std::to_string(y.size()) +
                    " channels, store has " + std::to_string(dim));
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("query vector has a non-finite entry");
  }
  if (k < 1) throw ConfigError("k must be >= 1");
  if (static_cast<std::size_t>(k) > size)
    throw ConfigError("k=" + std::to_string(k) + " exceeds store size " +
                      std::to_string(size));
}

// Bounded worst-first set of (distance, id) pairs.
class ResultSet {
public:
  explicit ResultSet(int k) : k_(static_cast<size_t>(k)) {}

  bool full() const { return heap_.size() == k_; }
  double worst() const {
    return full() ? heap_.front().distance
                  : std::numeric_limits<double>::infinity();
  }

  // Admission uses the same (distance, id) order as the final ranking.
  void offer(const NeighborHit& h) {
    if (!full()) {
      heap_.push_back(h);
      std::push_heap(heap_.begin(), heap_.end(), hit_less);
      return;
    }
    if (hit_less(h, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), hit_less);
      heap_.back() = h;
      std::push_heap(heap_.begin(), heap_.end(), hit_less);
    }
  }

  std::vector<NeighborHit> sorted() && {
    std::sort_heap(heap_.begin(), heap_.end(), hit_less);
    return std::move(heap_);
  }

private:
  size_t k_;
  std::vector<NeighborHit> heap_;
};

}  // namespace

std::vector<NeighborHit> brute_force_knn(
    const std::vector<const MatchedSample*>& store, std::span<const double> y,
    int k, const WeightMatrix& w) {
  if (w.dim() != static_cast<int>(y.size()))
    throw ConfigError("brute_force_knn: weight dimension mismatch");
  check_query(y, w.dim(), k, store.size());
  ResultSet rs(k);
  for (const MatchedSample* s : store) {
    NeighborHit h;
    h.sample_id = s->sample_id;
    h.distance = weighted_distance(y, s->tb, w);
    h.atmo = atmo_of(*s);
    h.sample = s;
    rs.offer(h);
  }
  return std::move(rs).sorted();
}

std::int32_t SearchIndex::build(std::vector<std::uint32_t>& perm,
                                const std::vector<double>& coords,
                                std::uint32_t begin, std::uint32_t end) {
  const std::int32_t idx = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    // Leaves sorted by id: the point array becomes a pure function of the
    // store content, independent of nth_element's internal ordering.
    std::sort(perm.begin() + begin, perm.begin() + end);
    nodes_[static_cast<size_t>(idx)].begin = begin;
    nodes_[static_cast<size_t>(idx)].end = end;
    return idx;
  }

  // Split along the widest dimension of the points in range (smallest
  // dimension index on ties).
  int split_dim = 0;
  double best_spread = -1.0;
  for (int d = 0; d < dim_; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      const double v = coords[static_cast<size_t>(perm[i]) * dim_ + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double spread = hi - lo;
    if (spread > best_spread) {
      best_spread = spread;
      split_dim = d;
    }
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto key = [&](std::uint32_t p) {
    return std::pair<double, std::uint32_t>(
        coords[static_cast<size_t>(p) * dim_ + split_dim], p);
  };
  std::nth_element(perm.begin() + begin, perm.begin() + mid,
                   perm.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return key(a) < key(b);
                   });
  const double split_val =
      coords[static_cast<size_t>(perm[mid]) * dim_ + split_dim];

  const std::int32_t left = build(perm, coords, begin, mid);
  const std::int32_t right = build(perm, coords, mid, end);
  Node& n = nodes_[static_cast<size_t>(idx)];
  n.split_dim = split_dim;
  n.split_val = split_val;
  n.left = left;
  n.right = right;
  n.begin = begin;
  n.end = end;
  return idx;
}

void SearchIndex::adopt_store_order(
    const std::vector<const MatchedSample*>& store,
    const std::vector<std::uint32_t>& perm, const std::vector<double>& coords) {
  const size_t n = store.size();
  points_.resize(n * static_cast<size_t>(dim_));
  ids_.resize(n);
  atmo_.resize(n);
  samples_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const std::uint32_t src = perm[i];
    const MatchedSample* s = store[src];
    std::copy_n(coords.begin() + static_cast<size_t>(src) * dim_, dim_,
                points_.begin() + i * static_cast<size_t>(dim_));
    ids_[i] = s->sample_id;
    atmo_[i] = atmo_of(*s);
    samples_[i] = s;
  }
}

SearchIndex::SearchIndex(const std::vector<const MatchedSample*>& store,
                         const WeightMatrix& w) {
  if (store.empty()) throw DataError("cannot build an index over an empty store");
  dim_ = w.dim();
  transform_ = whiten(w);

  // Order by sample_id up front; everything downstream is then independent
  // of the caller's permutation.
  std::vector<const MatchedSample*> ordered(store);
  std::sort(ordered.begin(), ordered.end(),
            [](const MatchedSample* a, const MatchedSample* b) {
              return a->sample_id < b->sample_id;
            });
  for (size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->sample_id == ordered[i - 1]->sample_id)
      throw DataError("store contains duplicate sample id " +
                      std::to_string(ordered[i]->sample_id));
  }

  std::vector<double> coords(ordered.size() * static_cast<size_t>(dim_));
  for (size_t i = 0; i < ordered.size(); ++i) {
    if (static_cast<int>(ordered[i]->tb.size()) != dim_)
      throw DataError("sample " + std::to_string(ordered[i]->sample_id) +
                      ": tb length does not match weight dimension");
    transform_.apply(ordered[i]->tb.data(),
                     coords.data() + i * static_cast<size_t>(dim_));
  }

  std::vector<std::uint32_t> perm(ordered.size());
  for (size_t i = 0; i < perm.size(); ++i)
    perm[i] = static_cast<std::uint32_t>(i);
  nodes_.reserve(2 * ordered.size() / kLeafSize + 4);
  build(perm, coords, 0, static_cast<std::uint32_t>(ordered.size()));
  adopt_store_order(ordered, perm, coords);
}

std::vector<NeighborHit> SearchIndex::query(std::span<const double> y,
                                            int k) const {
  check_query(y, dim_, k, ids_.size());
  std::vector<double> q(static_cast<size_t>(dim_));
  transform_.apply(y.data(), q.data());

  ResultSet rs(k);
  std::vector<double> rd(static_cast<size_t>(dim_), 0.0);

  // FLANN-style backtracking with an incrementally maintained lower bound on
  // the distance to the far half-space. Equal bounds are not pruned, so
  // ties stay reachable and id ordering stays exact.
  auto search = [&](auto&& self, std::int32_t node_idx,
                    double mindist) -> void {
    const Node& node = nodes_[static_cast<size_t>(node_idx)];
    if (node.split_dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double* p = points_.data() + static_cast<size_t>(i) * dim_;
        double acc = 0.0;
        bool skip = false;
        const double worst = rs.worst();
        for (int d = 0; d < dim_; ++d) {
          const double diff = q[static_cast<size_t>(d)] - p[d];
          acc += diff * diff;
          if (acc > worst) {  // strict: equal distances still compare ids
            skip = true;
            break;
          }
        }
        if (skip) continue;
        NeighborHit h;
        h.sample_id = ids_[i];
        h.distance = acc;
        h.atmo = atmo_[i];
        h.sample = samples_[i];
        rs.offer(h);
      }
      return;
    }

    const int d = node.split_dim;
    const double diff = q[static_cast<size_t>(d)] - node.split_val;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;

    self(self, near, mindist);

    const double old_rd = rd[static_cast<size_t>(d)];
    const double new_rd = diff * diff;
    const double far_bound = mindist - old_rd + new_rd;
    if (!rs.full() || far_bound <= rs.worst()) {
      rd[static_cast<size_t>(d)] = new_rd;
      self(self, far, far_bound);
      rd[static_cast<size_t>(d)] = old_rd;
    }
  };
  search(search, 0, 0.0);
  return std::move(rs).sorted();
}

std::uint64_t SearchIndex::structure_checksum() const {
  BinWriter w;
  save(w);
  return fnv1a64(std::span(w.payload().data(), w.payload().size()));
}

void SearchIndex::save(BinWriter& w) const {
  w.tag("IDX1");
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u8(transform_.diagonal ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(transform_.coeffs.size()));
  for (double c : transform_.coeffs) w.f64(c);
  w.u64(ids_.size());
  for (std::uint64_t id : ids_) w.u64(id);
  for (double p : points_) w.f64(p);
  for (AtmosphericClass a : atmo_) w.u8(static_cast<std::uint8_t>(a));
  w.u32(static_cast<std::uint32_t>(nodes_.size()));
  for (const Node& n : nodes_) {
    w.u32(static_cast<std::uint32_t>(n.split_dim));
    w.f64(n.split_val);
    w.u32(static_cast<std::uint32_t>(n.left));
    w.u32(static_cast<std::uint32_t>(n.right));
    w.u32(n.begin);
    w.u32(n.end);
  }
}

SearchIndex SearchIndex::load(BinReader& r,
                              const std::vector<const MatchedSample*>& store) {
  r.expect_tag("IDX1");
  SearchIndex idx;
  idx.dim_ = static_cast<int>(r.u32());
  if (idx.dim_ < 1 || idx.dim_ > 4096)
    throw DataError("index: dimension out of range");
  idx.transform_.dim = idx.dim_;
  idx.transform_.diagonal = r.u8() != 0;
  const std::uint32_t ncoef = r.u32();
  const std::uint32_t expected =
      idx.transform_.diagonal
          ? static_cast<std::uint32_t>(idx.dim_)
          : static_cast<std::uint32_t>(idx.dim_) * idx.dim_;
  if (ncoef != expected)
    throw DataError("index: whitening coefficient count mismatch");
  idx.transform_.coeffs.resize(ncoef);
  for (auto& c : idx.transform_.coeffs) c = r.f64();

  const std::uint64_t n = r.u64();
  if (n == 0) throw DataError("index: empty point set");
  idx.ids_.resize(n);
  for (auto& id : idx.ids_) id = r.u64();
  idx.points_.resize(n * static_cast<size_t>(idx.dim_));
  for (auto& p : idx.points_) p = r.f64();
  idx.atmo_.resize(n);
  for (auto& a : idx.atmo_) {
    std::uint8_t code = r.u8();
    if (code >= kNumAtmoClasses) throw DataError("index: bad class code");
    a = static_cast<AtmosphericClass>(code);
  }
  const std::uint32_t nn = r.u32();
  if (nn == 0) throw DataError("index: empty node table");
  idx.nodes_.resize(nn);
  for (auto& node : idx.nodes_) {
    node.split_dim = static_cast<std::int32_t>(r.u32());
    node.split_val = r.f64();
    node.left = static_cast<std::int32_t>(r.u32());
    node.right = static_cast<std::int32_t>(r.u32());
    node.begin = r.u32();
    node.end = r.u32();
    if (node.split_dim >= idx.dim_)
      throw DataError("index: split dimension out of range");
    if (node.end > n || node.begin > node.end)
      throw DataError("index: node range out of bounds");
    if (node.split_dim >= 0 &&
        (node.left < 0 || node.right < 0 ||
         node.left >= static_cast<std::int32_t>(nn) ||
         node.right >= static_cast<std::int32_t>(nn)))
      throw DataError("index: child index out of bounds");
  }

  std::unordered_map<std::uint64_t, const MatchedSample*> by_id;
  by_id.reserve(store.size());
  for (const MatchedSample* s : store) by_id.emplace(s->sample_id, s);
  idx.samples_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto it = by_id.find(idx.ids_[i]);
    if (it == by_id.end())
      throw DataError("index references sample id " +
                      std::to_string(idx.ids_[i]) +
                      " absent from the database");
    idx.samples_[i] = it->second;
  }
  return idx;
}

void save_index(const SearchIndex& index, const std::string& path) {
  BinWriter w;
  index.save(w);
  w.write_file(path, PayloadKind::Index);
}

SearchIndex load_index(const std::string& path,
                       const std::vector<const MatchedSample*>& store) {
  BinReader r(path, PayloadKind::Index);
  SearchIndex idx = SearchIndex::load(r, store);
  r.expect_end();
  return idx;
}

std::vector<NeighborHit> rank_subset(std::span<const NeighborHit> candidates,
                                     std::span<const double> y,
                                     const WeightMatrix& w) {
  std::vector<NeighborHit> out;
  out.reserve(candidates.size());
  for (const NeighborHit& c : candidates) {
    if (c.sample == nullptr)
      throw InternalError("rank_subset: candidate without sample binding");
    NeighborHit h = c;
    h.distance = weighted_distance(y, c.sample->tb, w);
    out.push_back(h);
  }
  std::sort(out.begin(), out.end(), hit_less);
  return out;
}

}  // namespace nestknn
