#pragma once

#include "am/appearance.hpp"
#include "ssm/warp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <vector>

namespace regtrack {

class SearchContext;
struct SmConfig;

struct IndexConfig {
  int trees = 4;
  int checks = 512;
  int leaf_size = 4;
  bool exact = false;
  std::uint64_t seed = 0;
};

/// Stored template warps searched under the AM's nn_distance. The
/// approximate mode is a forest of randomized kd-trees over nn_features,
/// explored best-bin-first until `checks` stored samples have been scored;
/// every candidate is scored with the true nn_distance, so a result is always
/// a stored sample with its exact distance.
class SampleIndex {
 public:
  struct Match {
    std::size_t index = 0;
    double distance = 0.0;
  };

  SampleIndex(std::shared_ptr<const AppearanceModel> am, std::vector<Patch> patches, std::vector<WarpParams> params,
              const IndexConfig& cfg);

  std::size_t size() const { return patches_.size(); }
  const Patch& patch(std::size_t i) const { return patches_[i]; }
  const WarpParams& params(std::size_t i) const { return params_[i]; }
  const IndexConfig& config() const { return cfg_; }

  Match query(const Patch& q) const;
  Match linear_scan(const Patch& q) const;

 private:
  struct Node {
    int dim = -1;  // -1 marks a leaf
    double split = 0.0;
    int child[2] = {-1, -1};
    int begin = 0, end = 0;  // leaf range in order_
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<int> order;
  };

  const double* feature(std::size_t i) const;
  int build_node(Tree& tree, int begin, int end, std::uint64_t& state);
  Match tree_search(const Patch& q) const;

  std::shared_ptr<const AppearanceModel> am_;
  std::vector<Patch> patches_;
  std::vector<WarpParams> params_;
  std::vector<Eigen::VectorXd> features_;  // empty when features are the raw patches
  IndexConfig cfg_;
  std::vector<Tree> trees_;
};

/// Draws cfg.nn_samples warps from one stream seeded by cfg.seed (sample 0 is
/// the identity), resamples the first frame under each and indexes the patches.
/// Index sizes built from the same seed share their leading samples.
std::shared_ptr<const SampleIndex> build_index(const SearchContext& ctx, const SmConfig& cfg);

/// One nearest-neighbour jump: p <- p o q^{-1} for the best stored warp q.
WarpParams nn_step(const SearchContext& ctx, const SampleIndex& index, const WarpParams& p, const GrayImage& frame);

}  // namespace regtrack
