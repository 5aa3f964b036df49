#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "core/weights.hpp"

namespace nestknn {

class BinReader;
class BinWriter;

// One retrieved database neighbor. distance is the squared weighted
// Euclidean distance (the square root is monotone, so ranking never takes
// it). Hits order by (distance, sample_id); ids are unique, so the order is
// total and duplicate vectors are both retrievable deterministically.
struct NeighborHit {
  std::uint64_t sample_id = 0;
  double distance = 0.0;
  AtmosphericClass atmo = AtmosphericClass::Clear;
  const MatchedSample* sample = nullptr;
};

bool hit_less(const NeighborHit& a, const NeighborHit& b);

// Quadratic form (y-x)^T W (y-x), evaluated directly. This is the reference
// route; the search index works in whitened coordinates instead, and the two
// must agree to float tolerance (asserted by tests).
double weighted_distance(std::span<const double> y, std::span<const double> x,
                         const WeightMatrix& w);

// Exact k nearest by full scan over the store. Ties broken by sample_id.
std::vector<NeighborHit> brute_force_knn(
    const std::vector<const MatchedSample*>& store, std::span<const double> y,
    int k, const WeightMatrix& w);

// Exact k nearest via a kd-tree over whitened store vectors, with
// backtracking. Equal-distance frontiers are never pruned, so results match
// brute_force_knn id for id. Construction is deterministic and independent
// of store permutation: the store is ordered by sample_id first, medians use
// a (coordinate, id) total order, and leaf ranges are sorted by id.
class SearchIndex {
public:
  SearchIndex() = default;
  SearchIndex(const std::vector<const MatchedSample*>& store,
              const WeightMatrix& w);

  std::vector<NeighborHit> query(std::span<const double> y, int k) const;

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }

  // Checksum over the serialized structure; equal checksums mean equal
  // trees. Used by determinism tests.
  std::uint64_t structure_checksum() const;

  void save(BinWriter& w) const;
  static SearchIndex load(BinReader& r,
                          const std::vector<const MatchedSample*>& store);

private:
  struct Node {
    std::int32_t split_dim = -1;  // -1 marks a leaf
    double split_val = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  static constexpr int kLeafSize = 16;

  std::int32_t build(std::vector<std::uint32_t>& perm,
                     const std::vector<double>& coords, std::uint32_t begin,
                     std::uint32_t end);
  void adopt_store_order(const std::vector<const MatchedSample*>& store,
                         const std::vector<std::uint32_t>& perm,
                         const std::vector<double>& coords);

  int dim_ = 0;
  WhitenTransform transform_;
  std::vector<double> points_;  // whitened, tree order, row-major
  std::vector<std::uint64_t> ids_;
  std::vector<AtmosphericClass> atmo_;
  std::vector<const MatchedSample*> samples_;
  std::vector<Node> nodes_;
};

// Index persistence as a standalone envelope (PayloadKind::Index, section
// tag IDX1). Loading rebinds sample pointers through the given store and
// fails if any indexed id is missing from it.
void save_index(const SearchIndex& index, const std::string& path);
SearchIndex load_index(const std::string& path,
                       const std::vector<const MatchedSample*>& store);

// Ranks an explicit candidate set under its own weight matrix (fresh
// quadratic-form distances, not a re-sort of upstream distances). The nested
// stages use this on the shrinking candidate pools.
std::vector<NeighborHit> rank_subset(std::span<const NeighborHit> candidates,
                                     std::span<const double> y,
                                     const WeightMatrix& w);

}  // namespace nestknn
