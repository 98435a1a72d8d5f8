#include "sm/sample_index.hpp"

#include "core/error.hpp"
#include "sm/search.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <random>

namespace regtrack {

namespace {

constexpr int kTopVarianceDims = 5;
constexpr int kVarianceSampleSize = 128;

}  // namespace

SampleIndex::SampleIndex(std::shared_ptr<const AppearanceModel> am, std::vector<Patch> patches,
                         std::vector<WarpParams> params, const IndexConfig& cfg)
    : am_(std::move(am)), patches_(std::move(patches)), params_(std::move(params)), cfg_(cfg) {
  if (!am_) fail(ErrorCode::invalid_argument, "sample index needs an appearance model");
  if (patches_.empty() || patches_.size() != params_.size())
    fail(ErrorCode::dimension_mismatch, "sample index needs one parameter vector per stored patch");
  for (const auto& p : patches_)
    if (p.size() != patches_.front().size()) fail(ErrorCode::dimension_mismatch, "stored patches differ in length");
  if (cfg_.trees < 1 || cfg_.checks < 1 || cfg_.leaf_size < 1)
    fail(ErrorCode::invalid_argument, "index trees, checks and leaf size must be positive");
  if (cfg_.exact) return;

  if (!am_->features_are_raw()) {
    features_.reserve(patches_.size());
    for (const auto& p : patches_) features_.push_back(am_->nn_features(p));
  }
  std::mt19937_64 rng(cfg_.seed);
  trees_.resize(static_cast<std::size_t>(cfg_.trees));
  for (auto& tree : trees_) {
    tree.order.resize(patches_.size());
    std::iota(tree.order.begin(), tree.order.end(), 0);
    std::shuffle(tree.order.begin(), tree.order.end(), rng);
    std::uint64_t state = rng();
    build_node(tree, 0, static_cast<int>(tree.order.size()), state);
  }
}

const double* SampleIndex::feature(std::size_t i) const {
  return features_.empty() ? patches_[i].data() : features_[i].data();
}

int SampleIndex::build_node(Tree& tree, int begin, int end, std::uint64_t& state) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(Node{});
  auto make_leaf = [&] {
    tree.nodes[id].begin = begin;
    tree.nodes[id].end = end;
    return id;
  };
  const int count = end - begin;
  if (count <= cfg_.leaf_size) return make_leaf();

  const auto dims = patches_.front().size();
  const int stride = std::max(1, count / kVarianceSampleSize);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims), sq = Eigen::VectorXd::Zero(dims);
  int used = 0;
  for (int k = begin; k < end; k += stride, ++used) {
    const Eigen::Map<const Eigen::VectorXd> f(feature(static_cast<std::size_t>(tree.order[k])), dims);
    sum += f;
    sq += f.cwiseAbs2();
  }
  const Eigen::VectorXd mean = sum / used;
  const Eigen::VectorXd var = sq / used - mean.cwiseAbs2();

  std::vector<int> idx(static_cast<std::size_t>(dims));
  std::iota(idx.begin(), idx.end(), 0);
  const int top = std::min<int>(kTopVarianceDims, static_cast<int>(dims));
  std::partial_sort(idx.begin(), idx.begin() + top, idx.end(), [&](int a, int b) {
    return var[a] > var[b] || (var[a] == var[b] && a < b);
  });
  if (!(var[idx[0]] > 0.0)) return make_leaf();
  int usable = 0;
  while (usable < top && var[idx[static_cast<std::size_t>(usable)]] > 0.0) ++usable;
  // splitmix64 keeps the tree shape a pure function of the build seed.
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  const int dim = idx[static_cast<std::size_t>(z % static_cast<std::uint64_t>(usable))];

  auto value = [&](int sample) { return feature(static_cast<std::size_t>(sample))[dim]; };
  double split = mean[dim];
  auto first = tree.order.begin() + begin, last = tree.order.begin() + end;
  auto mid = std::partition(first, last, [&](int s) { return value(s) < split; });
  if (mid == first || mid == last) {
    mid = first + count / 2;
    std::nth_element(first, mid, last, [&](int a, int b) { return value(a) < value(b); });
    split = value(*mid);
    mid = std::partition(first, last, [&](int s) { return value(s) < split; });
    if (mid == first || mid == last) return make_leaf();
  }
  const int mid_index = static_cast<int>(mid - tree.order.begin());
  const int left = build_node(tree, begin, mid_index, state);
  const int right = build_node(tree, mid_index, end, state);
  Node& node = tree.nodes[id];
  node.dim = dim;
  node.split = split;
  node.child[0] = left;
  node.child[1] = right;
  return id;
}

SampleIndex::Match SampleIndex::linear_scan(const Patch& q) const {
  if (q.size() != patches_.front().size()) fail(ErrorCode::dimension_mismatch, "query length mismatch");
  Match best{0, am_->nn_distance(patches_[0], q)};
  for (std::size_t i = 1; i < patches_.size(); ++i) {
    const double d = am_->nn_distance(patches_[i], q);
    if (d < best.distance) best = Match{i, d};
  }
  return best;
}

SampleIndex::Match SampleIndex::tree_search(const Patch& q) const {
  if (q.size() != patches_.front().size()) fail(ErrorCode::dimension_mismatch, "query length mismatch");
  const Eigen::VectorXd fq = features_.empty() ? Eigen::VectorXd(q) : am_->nn_features(q);

  struct Entry {
    double bound;
    int tree;
    int node;
    bool operator>(const Entry& o) const {
      if (bound != o.bound) return bound > o.bound;
      if (tree != o.tree) return tree > o.tree;
      return node > o.node;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pending;
  for (int t = 0; t < static_cast<int>(trees_.size()); ++t) pending.push(Entry{0.0, t, 0});

  std::vector<char> seen(patches_.size(), 0);
  Match best{patches_.size(), 0.0};
  int checks = 0;
  while (!pending.empty() && (checks < cfg_.checks || best.index == patches_.size())) {
    Entry e = pending.top();
    pending.pop();
    const Tree& tree = trees_[static_cast<std::size_t>(e.tree)];
    int n = e.node;
    while (tree.nodes[static_cast<std::size_t>(n)].dim >= 0) {
      const Node& node = tree.nodes[static_cast<std::size_t>(n)];
      const double diff = fq[node.dim] - node.split;
      const int near = diff < 0.0 ? 0 : 1;
      pending.push(Entry{e.bound + diff * diff, e.tree, node.child[1 - near]});
      n = node.child[near];
    }
    const Node& leaf = tree.nodes[static_cast<std::size_t>(n)];
    for (int k = leaf.begin; k < leaf.end; ++k) {
      const auto s = static_cast<std::size_t>(tree.order[static_cast<std::size_t>(k)]);
      if (seen[s]) continue;
      seen[s] = 1;
      ++checks;
      const double d = am_->nn_distance(patches_[s], q);
      if (best.index == patches_.size() || d < best.distance || (d == best.distance && s < best.index))
        best = Match{s, d};
    }
  }
  return best;
}

SampleIndex::Match SampleIndex::query(const Patch& q) const { return cfg_.exact ? linear_scan(q) : tree_search(q); }

std::shared_ptr<const SampleIndex> build_index(const SearchContext& ctx, const SmConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.nn_samples);
  std::vector<Patch> patches;
  std::vector<WarpParams> params;
  patches.reserve(n);
  params.reserve(n);
  params.push_back(ctx.ssm().identity());
  patches.push_back(ctx.templ());
  std::mt19937_64 rng(cfg.seed);
  while (patches.size() < n) {
    const WarpParams q = ctx.ssm().sample(cfg.nn_sigma, rng);
    try {
      patches.push_back(ctx.candidate(ctx.first_frame(), q));
      params.push_back(q);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_warp) throw;
    }
  }
  IndexConfig icfg;
  icfg.trees = cfg.nn_trees;
  icfg.checks = cfg.nn_checks;
  icfg.exact = cfg.nn_exact;
  icfg.seed = cfg.seed ^ 0xD1B54A32D192ED03ULL;
  return std::make_shared<SampleIndex>(ctx.am_ptr(), std::move(patches), std::move(params), icfg);
}

WarpParams nn_step(const SearchContext& ctx, const SampleIndex& index, const WarpParams& p, const GrayImage& frame) {
  const auto match = index.query(ctx.candidate(frame, p));
  return ctx.ssm().compose(p, ctx.ssm().invert(index.params(match.index)));
}

}  // namespace regtrack
