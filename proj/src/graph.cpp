#include "seedprompt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "seedprompt/errors.hpp"
#include "seedprompt/hash.hpp"

namespace seedprompt {

KnowledgeGraph::KnowledgeGraph(
    std::vector<Entity> nodes,
    const std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>& counts,
    std::vector<std::uint64_t> analysis_freq)
    : nodes_(std::move(nodes)), analysis_freq_(std::move(analysis_freq)) {
  const std::size_t m = nodes_.size();
  if (analysis_freq_.size() != m) {
    throw Error("graph: analysis frequency table does not match node count");
  }
  for (std::size_t i = 1; i < m; ++i) {
    if (!(nodes_[i - 1] < nodes_[i])) throw Error("graph: nodes must be strictly ascending");
  }

  row_offsets_.assign(m + 1, 0);
  edges_.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    const auto [source, target] = key;
    if (source >= m || target >= m) throw Error("graph: edge endpoint out of range");
    if (count == 0) throw Error("graph: zero-count edges are not stored");
    ++row_offsets_[source + 1];
    edges_.push_back(Edge{target, count, 0.0});
  }
  for (std::size_t i = 0; i < m; ++i) row_offsets_[i + 1] += row_offsets_[i];
  edge_count_ = edges_.size();

  ranked_.resize(edges_.size());
  rank_of_edge_.resize(edges_.size());
  const double node_total = static_cast<double>(m);
  for (std::size_t source = 0; source < m; ++source) {
    const std::size_t begin = row_offsets_[source];
    const std::size_t end = row_offsets_[source + 1];
    std::uint64_t row_sum = 0;
    for (std::size_t k = begin; k < end; ++k) row_sum += edges_[k].count;
    for (std::size_t k = begin; k < end; ++k) {
      Edge& edge = edges_[k];
      const double share = static_cast<double>(edge.count) / static_cast<double>(row_sum);
      const double damping =
          std::log10(node_total / (1.0 + static_cast<double>(analysis_freq_[edge.target])));
      edge.weight = share * damping;
    }

    // Target indices follow entity string order, so index order is the tie-break.
    auto ranked = std::span(ranked_).subspan(begin, end - begin);
    for (std::size_t k = begin; k < end; ++k) ranked[k - begin] = static_cast<std::uint32_t>(k - begin);
    std::sort(ranked.begin(), ranked.end(), [&](std::uint32_t a, std::uint32_t b) {
      const Edge& ea = edges_[begin + a];
      const Edge& eb = edges_[begin + b];
      if (ea.weight != eb.weight) return ea.weight > eb.weight;
      return ea.target < eb.target;
    });
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      rank_of_edge_[begin + ranked[r]] = static_cast<std::uint32_t>(r + 1);
    }
  }
}

std::optional<std::uint32_t> KnowledgeGraph::index_of(const Entity& e) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), e);
  if (it == nodes_.end() || *it != e) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes_.begin());
}

std::span<const KnowledgeGraph::Edge> KnowledgeGraph::out_edges(std::uint32_t source) const {
  return std::span(edges_).subspan(row_offsets_[source],
                                   row_offsets_[source + 1] - row_offsets_[source]);
}

std::span<const std::uint32_t> KnowledgeGraph::ranked_targets(std::uint32_t source) const {
  return std::span(ranked_).subspan(row_offsets_[source],
                                    row_offsets_[source + 1] - row_offsets_[source]);
}

namespace {

// Position of `target` within a target-sorted row, or npos.
std::size_t find_edge(std::span<const KnowledgeGraph::Edge> row, std::uint32_t target) {
  auto it = std::lower_bound(row.begin(), row.end(), target,
                             [](const KnowledgeGraph::Edge& e, std::uint32_t t) {
                               return e.target < t;
                             });
  if (it == row.end() || it->target != target) return static_cast<std::size_t>(-1);
  return static_cast<std::size_t>(it - row.begin());
}

}  // namespace

std::int64_t KnowledgeGraph::raw_count(const Entity& source, const Entity& target) const {
  auto s = index_of(source);
  auto t = index_of(target);
  if (!s || !t) return -1;
  auto row = out_edges(*s);
  const std::size_t k = find_edge(row, *t);
  if (k == static_cast<std::size_t>(-1)) return -1;
  return static_cast<std::int64_t>(row[k].count);
}

std::optional<double> KnowledgeGraph::weight(const Entity& source, const Entity& target) const {
  auto s = index_of(source);
  auto t = index_of(target);
  if (!s || !t) return std::nullopt;
  auto row = out_edges(*s);
  const std::size_t k = find_edge(row, *t);
  if (k == static_cast<std::size_t>(-1)) return std::nullopt;
  return row[k].weight;
}

std::uint64_t KnowledgeGraph::analysis_freq(const Entity& e) const {
  auto i = index_of(e);
  return i ? analysis_freq_[*i] : 0;
}

NeighborList KnowledgeGraph::neighbors(const Entity& e) const {
  NeighborList list{e, {}};
  auto s = index_of(e);
  if (!s) return list;
  auto row = out_edges(*s);
  for (std::uint32_t pos : ranked_targets(*s)) {
    list.targets.push_back(Neighbor{nodes_[row[pos].target], row[pos].weight});
  }
  return list;
}

std::optional<std::size_t> KnowledgeGraph::rank_position(const Entity& source,
                                                         const Entity& target) const {
  auto s = index_of(source);
  auto t = index_of(target);
  if (!s || !t) return std::nullopt;
  auto row = out_edges(*s);
  const std::size_t k = find_edge(row, *t);
  if (k == static_cast<std::size_t>(-1)) return std::nullopt;
  return rank_of_edge_[row_offsets_[*s] + k];
}

std::size_t KnowledgeGraph::out_degree(const Entity& source) const {
  auto s = index_of(source);
  return s ? out_edges(*s).size() : 0;
}

bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  if (a.nodes_ != b.nodes_ || a.analysis_freq_ != b.analysis_freq_ ||
      a.row_offsets_ != b.row_offsets_ || a.edges_.size() != b.edges_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.edges_.size(); ++k) {
    const auto& x = a.edges_[k];
    const auto& y = b.edges_[k];
    if (x.target != y.target || x.count != y.count || x.weight != y.weight) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Construction

void GraphBuilder::add(const AnnotatedInstance& instance) {
  for (const Entity& e : instance.qo_entities) nodes_.insert(e);
  for (const Entity& e : instance.r_entities) {
    nodes_.insert(e);
    ++analysis_freq_[e];
  }
  for (const Entity& source : instance.qo_entities) {
    for (const Entity& target : instance.r_entities) ++counts_[{source, target}];
  }
}

void GraphBuilder::merge(const GraphBuilder& other) {
  nodes_.insert(other.nodes_.begin(), other.nodes_.end());
  for (const auto& [key, count] : other.counts_) counts_[key] += count;
  for (const auto& [e, count] : other.analysis_freq_) analysis_freq_[e] += count;
}

KnowledgeGraph GraphBuilder::finish() const {
  std::vector<Entity> nodes(nodes_.begin(), nodes_.end());
  auto index = [&](const Entity& e) {
    return static_cast<std::uint32_t>(std::lower_bound(nodes.begin(), nodes.end(), e) -
                                      nodes.begin());
  };
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> counts;
  for (const auto& [key, count] : counts_) counts[{index(key.first), index(key.second)}] = count;
  std::vector<std::uint64_t> freq(nodes.size(), 0);
  for (const auto& [e, count] : analysis_freq_) freq[index(e)] = count;
  return KnowledgeGraph(std::move(nodes), counts, std::move(freq));
}

KnowledgeGraph build_graph(const std::vector<AnnotatedInstance>& train, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, train.size()));
  std::vector<GraphBuilder> shards(workers);
  parallel_for(workers, workers, [&](std::size_t shard) {
    for (std::size_t i = shard; i < train.size(); i += workers) shards[shard].add(train[i]);
  });
  for (std::size_t s = 1; s < shards.size(); ++s) shards[0].merge(shards[s]);
  return shards[0].finish();
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'K', 'S', 'G', 'R', 'A', 'P', 'H', '\0'};
constexpr std::size_t kTrailerSize = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw GraphFormatError(GraphFormatError::Kind::kTruncated,
                             "graph file is truncated at byte " + std::to_string(pos_));
    }
  }

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_graph(const KnowledgeGraph& graph) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kGraphFormatVersion);
  put_u64(out, graph.node_count());
  put_u64(out, graph.edge_count());
  for (const Entity& e : graph.nodes()) {
    put_u32(out, static_cast<std::uint32_t>(e.str().size()));
    out += e.str();
  }
  for (std::uint32_t s = 0; s < graph.node_count(); ++s) {
    for (const auto& edge : graph.out_edges(s)) {
      put_u32(out, s);
      put_u32(out, edge.target);
      put_u64(out, edge.count);
    }
  }
  for (std::uint32_t s = 0; s < graph.node_count(); ++s) put_u64(out, graph.analysis_freq(s));
  const auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

KnowledgeGraph deserialize_graph(std::string_view bytes) {
  using Kind = GraphFormatError::Kind;
  const std::string_view magic(kMagic, sizeof(kMagic));
  if (bytes.size() < magic.size()) {
    if (magic.substr(0, bytes.size()) == bytes && !bytes.empty()) {
      throw GraphFormatError(Kind::kTruncated, "graph file is truncated inside the header");
    }
    throw GraphFormatError(Kind::kVersion, "not a graph file (bad magic header)");
  }
  if (bytes.substr(0, magic.size()) != magic) {
    throw GraphFormatError(Kind::kVersion, "not a graph file (bad magic header)");
  }

  Reader reader(bytes);
  reader.take(magic.size());
  const std::uint32_t version = reader.u32();
  if (version != kGraphFormatVersion) {
    throw GraphFormatError(Kind::kVersion, "unsupported graph format version " +
                                               std::to_string(version) + " (expected " +
                                               std::to_string(kGraphFormatVersion) + ")");
  }
  const std::uint64_t m = reader.u64();
  const std::uint64_t edge_total = reader.u64();
  // Every node needs at least 4 + 8 bytes and every edge 16; reject absurd
  // headers before allocating.
  if (m > reader.remaining() / 12 || edge_total > reader.remaining() / 16) {
    throw GraphFormatError(Kind::kTruncated, "graph header counts exceed file size");
  }

  std::vector<std::string> raw_nodes;
  raw_nodes.reserve(m);
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint32_t len = reader.u32();
    raw_nodes.emplace_back(reader.take(len));
  }
  struct RawEdge {
    std::uint32_t source, target;
    std::uint64_t count;
  };
  std::vector<RawEdge> raw_edges;
  raw_edges.reserve(edge_total);
  for (std::uint64_t k = 0; k < edge_total; ++k) {
    RawEdge e{};
    e.source = reader.u32();
    e.target = reader.u32();
    e.count = reader.u64();
    raw_edges.push_back(e);
  }
  std::vector<std::uint64_t> freq(m);
  for (std::uint64_t i = 0; i < m; ++i) freq[i] = reader.u64();

  const std::size_t body_size = reader.position();
  if (reader.remaining() < kTrailerSize) {
    throw GraphFormatError(Kind::kTruncated, "graph file is missing its checksum trailer");
  }
  if (reader.remaining() > kTrailerSize) {
    throw GraphFormatError(Kind::kInvalid, "unexpected bytes after the checksum trailer");
  }
  const auto expected = sha256(bytes.substr(0, body_size));
  if (std::memcmp(expected.data(), bytes.data() + body_size, kTrailerSize) != 0) {
    throw GraphFormatError(Kind::kChecksum, "graph file checksum mismatch");
  }

  std::vector<Entity> nodes;
  nodes.reserve(m);
  for (const std::string& raw : raw_nodes) {
    if (text::is_blank(raw)) throw GraphFormatError(Kind::kInvalid, "empty node entity");
    Entity e = normalize_entity(raw);
    if (e.str() != raw) {
      throw GraphFormatError(Kind::kInvalid, "node '" + raw + "' is not normalized");
    }
    if (!nodes.empty() && !(nodes.back() < e)) {
      throw GraphFormatError(Kind::kInvalid, "node table is not strictly ascending");
    }
    nodes.push_back(std::move(e));
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> counts;
  std::pair<std::uint32_t, std::uint32_t> previous{0, 0};
  for (std::size_t k = 0; k < raw_edges.size(); ++k) {
    const RawEdge& e = raw_edges[k];
    if (e.source >= m || e.target >= m || e.count == 0) {
      throw GraphFormatError(Kind::kInvalid, "edge table entry " + std::to_string(k) +
                                                 " is out of range");
    }
    const std::pair<std::uint32_t, std::uint32_t> key{e.source, e.target};
    if (k > 0 && !(previous < key)) {
      throw GraphFormatError(Kind::kInvalid, "edge table is not strictly sorted");
    }
    previous = key;
    counts.emplace(key, e.count);
  }
  return KnowledgeGraph(std::move(nodes), counts, std::move(freq));
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_graph(graph));
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
  return deserialize_graph(read_file(path));
}

}  // namespace seedprompt
