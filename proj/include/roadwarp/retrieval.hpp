#pragma once

// Scene retrieval: a rotation-canonical 128-bin geometric histogram per scene
// and a hierarchical k-means vocabulary tree for approximate nearest-neighbour
// lookup over a tile corpus.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/physics.hpp"
#include "roadwarp/scenario_io.hpp"

namespace roadwarp {

inline constexpr std::size_t kOrientationBins = 8;
inline constexpr std::size_t kRadialBins = 4;
inline constexpr std::size_t kCurvatureBins = 4;
inline constexpr std::size_t kDescriptorDim = kOrientationBins * kRadialBins * kCurvatureBins;
static_assert(kDescriptorDim == 128);

/// Upper edges (1/m) of the first three curvature bins.
inline constexpr std::array<double, kCurvatureBins - 1> kCurvatureEdges{0.005, 0.02, 0.05};

struct SceneDescriptor {
  std::array<double, kDescriptorDim> values{};
  /// True when the histogram had no mass (values all zero).
  bool empty{false};

  friend bool operator==(const SceneDescriptor&, const SceneDescriptor&) = default;
};

inline double descriptor_distance(const SceneDescriptor& a, const SceneDescriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kDescriptorDim; ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline void l2_normalize(SceneDescriptor& d) {
  double acc = 0.0;
  for (double v : d.values) acc += v * v;
  d.empty = acc == 0.0;
  if (d.empty) return;
  const double inv = 1.0 / std::sqrt(acc);
  for (double& v : d.values) v *= inv;
}

inline std::size_t descriptor_bin(std::size_t orientation, std::size_t radial, std::size_t curvature) {
  return (orientation * kRadialBins + radial) * kCurvatureBins + curvature;
}

inline std::size_t curvature_bin(double kappa) {
  std::size_t b = 0;
  while (b < kCurvatureEdges.size() && kappa >= kCurvatureEdges[b]) ++b;
  return b;
}

/// Joint histogram over lane direction (relative to the dominant direction),
/// distance from the scene centroid (relative to the farthest sample) and
/// discrete curvature, counted on lanes resampled at 1 m.
inline SceneDescriptor scene_descriptor(const Scene& scene) {
  if (scene.lanes.empty()) throw InvariantError("scene_descriptor: scene has no lanes");
  struct Sample {
    Point2 p;
    Point2 tangent;  // unit
    double kappa;
  };
  std::vector<Sample> samples;
  for (const auto& lane : scene.lanes) {
    const auto pts = uniform_resample(lane.points, kCurvatureSpacing);
    const std::size_t n = pts.size();
    if (n < 2) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 a = pts[i == 0 ? 0 : i - 1];
      const Point2 b = pts[i + 1 == n ? n - 1 : i + 1];
      const Point2 d = b - a;
      const double len = norm(d);
      if (len == 0.0) continue;
      double kappa = 0.0;
      if (n >= 3) {
        const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
        const double r = circumradius(pts[c - 1], pts[c], pts[c + 1]);
        kappa = std::isinf(r) ? 0.0 : 1.0 / r;
      }
      samples.push_back({pts[i], (1.0 / len) * d, kappa});
    }
  }
  SceneDescriptor desc;
  if (samples.empty()) {
    desc.empty = true;
    return desc;
  }

  Point2 centroid{};
  for (const auto& s : samples) centroid = centroid + s.p;
  centroid = (1.0 / static_cast<double>(samples.size())) * centroid;
  double r_max = 0.0;
  for (const auto& s : samples) r_max = std::max(r_max, distance(s.p, centroid));

  // dominant axis from the doubled-angle mean, then pick the direction most
  // samples travel along
  double c2 = 0.0, s2 = 0.0;
  for (const auto& s : samples) {
    c2 += s.tangent.x * s.tangent.x - s.tangent.y * s.tangent.y;
    s2 += 2.0 * s.tangent.x * s.tangent.y;
  }
  const double axis = 0.5 * std::atan2(s2, c2);
  Point2 dominant{std::cos(axis), std::sin(axis)};
  double along = 0.0;
  for (const auto& s : samples) along += dot(s.tangent, dominant);
  if (along < 0.0) dominant = -1.0 * dominant;

  constexpr double bin_width = 2.0 * std::numbers::pi / kOrientationBins;
  for (const auto& s : samples) {
    const double rel = std::atan2(cross(dominant, s.tangent), dot(dominant, s.tangent));
    // shifted by half a bin so that the dominant direction sits at a bin centre
    auto ob = static_cast<long>(std::floor((rel + 0.5 * bin_width) / bin_width));
    ob = ((ob % static_cast<long>(kOrientationBins)) + static_cast<long>(kOrientationBins)) %
         static_cast<long>(kOrientationBins);
    const double rr = r_max > 0.0 ? distance(s.p, centroid) / r_max : 0.0;
    const auto rb = std::min<std::size_t>(kRadialBins - 1, static_cast<std::size_t>(rr * kRadialBins));
    desc.values[descriptor_bin(static_cast<std::size_t>(ob), rb, curvature_bin(s.kappa))] += 1.0;
  }
  l2_normalize(desc);
  return desc;
}

// ---------------------------------------------------------------------------
// Vocabulary tree

struct CorpusEntry {
  std::string id;
  Scene tile;
  std::string source;
};

/// What the index keeps per corpus entry (tiles themselves are not stored).
struct IndexedEntry {
  std::string id;
  std::string source;
  SceneDescriptor descriptor;
};

struct QueryHit {
  std::size_t entry{0};
  double distance{0.0};
};

inline constexpr int kDefaultBranching = 10;
inline constexpr int kDefaultDepth = 3;
inline constexpr int kKmeansIterations = 20;
inline constexpr std::size_t kBacktrackLeaves = 3;
inline constexpr int kIndexVersion = 1;

namespace detail {

using Vec = std::array<double, kDescriptorDim>;

inline double sq_dist(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kDescriptorDim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

/// Index of the nearest centre; ties go to the lowest index.
inline std::size_t nearest(const Vec& p, const std::vector<Vec>& centres) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centres.size(); ++c) {
    const double d = sq_dist(p, centres[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

/// Lloyd's k-means with k-means++ seeding. Returns the centres; empty clusters
/// are reseeded with the point farthest from its centre.
inline std::vector<Vec> kmeans(const std::vector<const Vec*>& pts, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng] { return std::generate_canonical<double, 53>(rng); };
  std::vector<Vec> centres;
  centres.reserve(k);
  centres.push_back(*pts[static_cast<std::size_t>(rng() % pts.size())]);
  std::vector<double> d2(pts.size());
  while (centres.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = sq_dist(*pts[i], centres[nearest(*pts[i], centres)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = uniform() * total;
      for (pick = 0; pick + 1 < pts.size(); ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = static_cast<std::size_t>(rng() % pts.size());
    }
    centres.push_back(*pts[pick]);
  }

  std::vector<std::size_t> assign(pts.size(), 0);
  for (int it = 0; it < kKmeansIterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::size_t c = nearest(*pts[i], centres);
      changed = changed || c != assign[i];
      assign[i] = c;
    }
    if (!changed) break;
    std::vector<Vec> sums(k, Vec{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < kDescriptorDim; ++j) sums[assign[i]][j] += (*pts[i])[j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = sq_dist(*pts[i], centres[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centres[c] = *pts[far];
        assign[far] = c;
        continue;
      }
      for (std::size_t j = 0; j < kDescriptorDim; ++j) centres[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  return centres;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t node) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (node + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class VocabTree {
 public:
  struct Node {
    detail::Vec centroid{};
    std::vector<std::size_t> children;
    std::vector<std::size_t> members;  // leaves only
    [[nodiscard]] bool is_leaf() const { return children.empty(); }
  };

  VocabTree() = default;

  /// Recursive k-means down to `depth` levels. Members are assigned to the
  /// nearest final centre, so descent reproduces the assignment exactly.
  static VocabTree build(std::vector<IndexedEntry> entries, int branching = kDefaultBranching,
                         int depth = kDefaultDepth, std::uint64_t seed = 0) {
    if (branching < 2) throw InvariantError("vocab tree: branching must be >= 2");
    if (depth < 1) throw InvariantError("vocab tree: depth must be >= 1");
    if (entries.size() < static_cast<std::size_t>(branching))
      throw InvariantError("vocab tree: corpus has " + std::to_string(entries.size()) + " entries, need at least " +
                           std::to_string(branching));
    VocabTree t;
    t.branching_ = branching;
    t.depth_ = depth;
    t.seed_ = seed;
    t.entries_ = std::move(entries);
    std::vector<std::size_t> all(t.entries_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    t.nodes_.push_back({});
    t.nodes_[0].centroid = t.mean_of(all);
    t.split(0, all, 0);
    return t;
  }

  static VocabTree build(const std::vector<CorpusEntry>& corpus, int branching = kDefaultBranching,
                         int depth = kDefaultDepth, std::uint64_t seed = 0) {
    std::vector<IndexedEntry> entries;
    entries.reserve(corpus.size());
    for (const auto& c : corpus) entries.push_back({c.id, c.source, scene_descriptor(c.tile)});
    return build(std::move(entries), branching, depth, seed);
  }

  /// Top-k entries by descriptor distance. Searches the descended leaf and the
  /// three other leaves whose centres are nearest to the query. When k covers
  /// the whole corpus every entry is returned.
  [[nodiscard]] std::vector<QueryHit> query(const SceneDescriptor& q, std::size_t k = 10) const {
    if (entries_.empty()) throw InvariantError("query: empty index");
    if (k == 0) return {};
    std::vector<std::size_t> candidates;
    if (k >= entries_.size()) {
      candidates.resize(entries_.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    } else {
      const std::size_t leaf = descend(q.values);
      candidates = nodes_[leaf].members;
      std::vector<std::pair<double, std::size_t>> others;
      for (std::size_t n = 0; n < nodes_.size(); ++n)
        if (n != leaf && nodes_[n].is_leaf()) others.emplace_back(detail::sq_dist(q.values, nodes_[n].centroid), n);
      std::sort(others.begin(), others.end());
      for (std::size_t i = 0; i < others.size() && i < kBacktrackLeaves; ++i) {
        const auto& m = nodes_[others[i].second].members;
        candidates.insert(candidates.end(), m.begin(), m.end());
      }
    }
    std::vector<QueryHit> hits;
    hits.reserve(candidates.size());
    for (std::size_t e : candidates) hits.push_back({e, descriptor_distance(q, entries_[e].descriptor)});
    std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.entry < b.entry;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  [[nodiscard]] std::vector<QueryHit> query(const Scene& scene, std::size_t k = 10) const {
    return query(scene_descriptor(scene), k);
  }

  /// Exact top-k by linear scan, for measuring the tree's approximation.
  [[nodiscard]] std::vector<QueryHit> exhaustive(const SceneDescriptor& q, std::size_t k) const {
    std::vector<QueryHit> hits;
    for (std::size_t e = 0; e < entries_.size(); ++e) hits.push_back({e, descriptor_distance(q, entries_[e].descriptor)});
    std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.entry < b.entry;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  /// Leaf node an entry was stored in.
  [[nodiscard]] std::size_t leaf_of(std::size_t entry) const {
    for (std::size_t n = 0; n < nodes_.size(); ++n)
      if (nodes_[n].is_leaf() &&
          std::find(nodes_[n].members.begin(), nodes_[n].members.end(), entry) != nodes_[n].members.end())
        return n;
    throw InvariantError("entry not indexed");
  }

  [[nodiscard]] std::size_t descend(const detail::Vec& q) const {
    std::size_t n = 0;
    while (!nodes_[n].is_leaf()) {
      const auto& ch = nodes_[n].children;
      std::size_t best = ch.front();
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c : ch) {
        const double d = detail::sq_dist(q, nodes_[c].centroid);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      n = best;
    }
    return n;
  }

  [[nodiscard]] const std::vector<IndexedEntry>& entries() const { return entries_; }
  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] int branching() const { return branching_; }
  [[nodiscard]] int depth() const { return depth_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
  }

  [[nodiscard]] json to_json() const {
    json j = json::object();
    j["version"] = kIndexVersion;
    j["branching"] = branching_;
    j["depth"] = depth_;
    j["seed"] = seed_;
    json entries = json::array();
    for (const auto& e : entries_) {
      json je = json::object();
      je["id"] = e.id;
      je["source"] = e.source;
      je["descriptor"] = e.descriptor.values;
      entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    json nodes = json::array();
    for (const auto& n : nodes_) {
      json jn = json::object();
      jn["centroid"] = n.centroid;
      jn["children"] = n.children;
      jn["members"] = n.members;
      nodes.push_back(std::move(jn));
    }
    j["nodes"] = std::move(nodes);
    return j;
  }

  static VocabTree from_json(const json& j) {
    VocabTree t;
    try {
      if (j.at("version").get<int>() != kIndexVersion) throw ParseError("index: unsupported version");
      t.branching_ = j.at("branching").get<int>();
      t.depth_ = j.at("depth").get<int>();
      t.seed_ = j.at("seed").get<std::uint64_t>();
      for (const auto& je : j.at("entries")) {
        IndexedEntry e{je.at("id").get<std::string>(), je.value("source", std::string{}), {}};
        e.descriptor.values = je.at("descriptor").get<detail::Vec>();
        double acc = 0.0;
        for (double v : e.descriptor.values) acc += v * v;
        e.descriptor.empty = acc == 0.0;
        t.entries_.push_back(std::move(e));
      }
      for (const auto& jn : j.at("nodes")) {
        Node n;
        n.centroid = jn.at("centroid").get<detail::Vec>();
        n.children = jn.at("children").get<std::vector<std::size_t>>();
        n.members = jn.at("members").get<std::vector<std::size_t>>();
        t.nodes_.push_back(std::move(n));
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("index: ") + e.what());
    }
    if (t.nodes_.empty()) throw ParseError("index: no nodes");
    for (const auto& n : t.nodes_) {
      for (std::size_t c : n.children)
        if (c >= t.nodes_.size()) throw ParseError("index: child out of range");
      for (std::size_t m : n.members)
        if (m >= t.entries_.size()) throw ParseError("index: member out of range");
    }
    return t;
  }

 private:
  [[nodiscard]] detail::Vec mean_of(const std::vector<std::size_t>& idx) const {
    detail::Vec m{};
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < kDescriptorDim; ++j) m[j] += entries_[i].descriptor.values[j];
    for (double& v : m) v /= static_cast<double>(idx.size());
    return m;
  }

  void split(std::size_t node, const std::vector<std::size_t>& members, int level) {
    if (level == depth_ || members.size() <= 1) {
      nodes_[node].members = members;
      return;
    }
    std::vector<const detail::Vec*> pts;
    pts.reserve(members.size());
    for (std::size_t i : members) pts.push_back(&entries_[i].descriptor.values);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(branching_), members.size());
    const auto centres = detail::kmeans(pts, k, detail::mix_seed(seed_, node));
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t i = 0; i < members.size(); ++i) groups[detail::nearest(*pts[i], centres)].push_back(members[i]);
    // all members identical: no split possible
    if (std::count_if(groups.begin(), groups.end(), [](const auto& g) { return !g.empty(); }) == 1) {
      nodes_[node].members = members;
      return;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (groups[c].empty()) continue;
      const std::size_t child = nodes_.size();
      nodes_.push_back({});
      nodes_[child].centroid = centres[c];
      nodes_[node].children.push_back(child);
    }
    // children were appended in group order; recurse after all siblings exist
    std::size_t next = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (groups[c].empty()) continue;
      split(nodes_[node].children[next++], groups[c], level + 1);
    }
  }

  int branching_{kDefaultBranching};
  int depth_{kDefaultDepth};
  std::uint64_t seed_{0};
  std::vector<IndexedEntry> entries_;
  std::vector<Node> nodes_;
};

inline void save_index(const VocabTree& t, const std::filesystem::path& path) {
  io::write_file(path, t.to_json().dump() + "\n");
}

inline VocabTree load_index(const std::filesystem::path& path) {
  return VocabTree::from_json(io::parse_text(io::read_file(path), path.string()));
}

/// Tiles from a file or directory of scenario-schema files. The id is the
/// file's "id" (or its stem); the source is the optional "source" string.
inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path) {
  std::vector<CorpusEntry> out;
  for (const auto& f : json_files(path)) {
    try {
      const json j = io::parse_text(io::read_file(f), f.string());
      CorpusEntry e;
      e.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : f.stem().string();
      e.source = j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>() : f.string();
      e.tile = scene_from_json(j);
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(f.string() + ": " + ex.what());
    }
  }
  if (out.empty()) throw ParseError("corpus: no tiles in " + path.string());
  return out;
}

}  // namespace roadwarp
