#include "bcolor/graph.hpp"

#include "bcolor/rng.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace bcolor {

Graph::Graph(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& edges) : n_(n) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  arcs.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw ParameterError("edge", "endpoint outside [0, n)");
    if (u == v) throw ParameterError("edge", "self-loop on node " + std::to_string(u));
    arcs.emplace_back(u, v);
    arcs.emplace_back(v, u);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
  offsets_.assign(n + 1, 0);
  targets_.resize(arcs.size());
  for (auto [u, v] : arcs) ++offsets_[u + 1];
  for (NodeId v = 0; v < n; ++v) offsets_[v + 1] += offsets_[v];
  for (size_t i = 0; i < arcs.size(); ++i) targets_[i] = arcs[i].second;
  for (NodeId v = 0; v < n; ++v) max_degree_ = std::max(max_degree_, degree(v));
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edge_count());
  for (NodeId u = 0; u < n_; ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

void GraphModel::validate() const {
  if (n < 0) throw ParameterError("n", "must be non-negative");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("p", "probability must lie in [0, 1]");
  if (!(rewire >= 0.0 && rewire <= 1.0)) throw ParameterError("rewire", "probability must lie in [0, 1]");
  if (kind == Kind::Gnp) return;
  if (k < 1) throw ParameterError("k", "clique count must be at least 1");
  if (s < 0) throw ParameterError("s", "clique size must be at least 1");
  if (kind == Kind::DisjointCliques) {
    if (s < 1) throw ParameterError("s", "clique size must be at least 1");
    return;
  }
  if (n < 1) throw ParameterError("n", "must be at least 1");
  const int64_t size = s > 0 ? s : (kind == Kind::PlantedCliques ? n / k : n / (2 * k));
  if (size < 1) throw ParameterError("s", "clique size must be at least 1");
  if (size * k > n) throw ParameterError("s", "k * s exceeds n");
}

std::string GraphModel::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Gnp: os << "gnp:n=" << n << ",p=" << p; break;
    case Kind::PlantedCliques: os << "planted:n=" << n << ",k=" << k << ",s=" << s << ",r=" << rewire; break;
    case Kind::DisjointCliques: os << "disjoint:k=" << k << ",s=" << s; break;
    case Kind::MixedSparseDense:
      os << "mixed:n=" << n << ",k=" << k << ",s=" << s << ",r=" << rewire << ",p=" << p;
      break;
  }
  return os.str();
}

GraphModel GraphModel::parse(const std::string& text) {
  GraphModel m;
  auto colon = text.find(':');
  std::string kind = text.substr(0, colon);
  if (kind == "gnp") m.kind = Kind::Gnp;
  else if (kind == "planted" || kind == "planted-cliques") m.kind = Kind::PlantedCliques;
  else if (kind == "disjoint" || kind == "disjoint-cliques") m.kind = Kind::DisjointCliques;
  else if (kind == "mixed" || kind == "mixed-sparse-dense") m.kind = Kind::MixedSparseDense;
  else throw ParameterError("kind", "unknown graph model '" + kind + "'");
  if (colon == std::string::npos) return m;
  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ParameterError(item, "expected key=value");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    try {
      if (key == "n") m.n = std::stoi(val);
      else if (key == "p") m.p = std::stod(val);
      else if (key == "k") m.k = std::stoi(val);
      else if (key == "s") m.s = std::stoi(val);
      else if (key == "r" || key == "rewire") m.rewire = std::stod(val);
      else throw ParameterError(key, "unknown parameter");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ParameterError*>(&e)) throw;
      throw ParameterError(key, "malformed value '" + val + "'");
    }
  }
  return m;
}

namespace {

void add_gnp(std::vector<std::pair<NodeId, NodeId>>& edges, const std::vector<NodeId>& nodes, double p, Rng& rng) {
  if (p <= 0) return;
  for (size_t i = 0; i < nodes.size(); ++i)
    for (size_t j = i + 1; j < nodes.size(); ++j)
      if (rng.bernoulli(p)) edges.emplace_back(nodes[i], nodes[j]);
}

}  // namespace

GeneratedGraph generate_with_truth(const GraphModel& model, uint64_t seed) {
  model.validate();
  Rng rng(mix64(seed ^ hash_tag("generate")));
  std::vector<std::pair<NodeId, NodeId>> edges;
  GeneratedGraph out;

  if (model.kind == GraphModel::Kind::Gnp) {
    std::vector<NodeId> all(model.n);
    for (NodeId v = 0; v < model.n; ++v) all[v] = v;
    add_gnp(edges, all, model.p, rng);
    out.graph = Graph(model.n, edges);
    out.planted.assign(model.n, -1);
    return out;
  }

  if (model.kind == GraphModel::Kind::DisjointCliques) {
    const NodeId n = model.k * model.s;
    out.planted.assign(n, -1);
    for (int c = 0; c < model.k; ++c)
      for (int a = 0; a < model.s; ++a) {
        out.planted[c * model.s + a] = c;
        for (int b = a + 1; b < model.s; ++b) edges.emplace_back(c * model.s + a, c * model.s + b);
      }
    out.graph = Graph(n, edges);
    return out;
  }

  const NodeId n = model.n;
  const int s = model.s > 0 ? model.s
                            : (model.kind == GraphModel::Kind::PlantedCliques ? n / model.k : n / (2 * model.k));
  std::vector<NodeId> perm(n);
  for (NodeId v = 0; v < n; ++v) perm[v] = v;
  rng.shuffle(perm);
  out.planted.assign(n, -1);
  for (int c = 0; c < model.k; ++c)
    for (int a = 0; a < s; ++a) out.planted[perm[c * s + a]] = c;

  for (int c = 0; c < model.k; ++c) {
    const NodeId* members = perm.data() + static_cast<size_t>(c) * s;
    for (int a = 0; a < s; ++a)
      for (int b = a + 1; b < s; ++b) {
        if (model.rewire > 0 && rng.bernoulli(model.rewire) && n > s) {
          NodeId u = rng.bernoulli(0.5) ? members[a] : members[b];
          NodeId w;
          do w = static_cast<NodeId>(rng.below(n));
          while (out.planted[w] == c);
          edges.emplace_back(u, w);
        } else {
          edges.emplace_back(members[a], members[b]);
        }
      }
  }
  std::vector<NodeId> rest(perm.begin() + static_cast<size_t>(model.k) * s, perm.end());
  std::sort(rest.begin(), rest.end());
  add_gnp(edges, rest, model.p, rng);
  out.graph = Graph(n, edges);
  return out;
}

Graph generate(const GraphModel& model, uint64_t seed) { return generate_with_truth(model, seed).graph; }

int64_t neighborhood_edges(const Graph& g, NodeId v) {
  auto nv = g.neighbors(v);
  int64_t twice = 0;
  for (NodeId u : nv) {
    auto nu = g.neighbors(u);
    auto a = nv.begin();
    auto b = nu.begin();
    while (a != nv.end() && b != nu.end()) {
      if (*a < *b) ++a;
      else if (*b < *a) ++b;
      else {
        ++twice;
        ++a;
        ++b;
      }
    }
  }
  return twice / 2;
}

Rational sparsity(const Graph& g, NodeId v) {
  const int64_t d = g.max_degree();
  if (d == 0) return Rational(0);
  return Rational(d * (d - 1) / 2 - neighborhood_edges(g, v), d);
}

ParsedGraph parse_edge_list(const std::string& text) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId n = 0;
  int line_no = 0;
  std::istringstream in(text);
  std::string line;
  auto read_int = [&](const char*& p, const char* end, int64_t& out) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    auto [q, ec] = std::from_chars(p, end, out);
    if (ec != std::errc() || q == p) return false;
    p = q;
    return true;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) continue;
    if (*p == '#') {
      int64_t declared;
      const char* q = p + 1;
      while (q < end && *q == ' ') ++q;
      if (q < end && *q == 'n' && read_int(++q, end, declared)) {
        if (declared < 0 || declared > INT32_MAX) throw ParseError(line_no, "node count out of range");
        n = std::max<NodeId>(n, static_cast<NodeId>(declared));
      }
      continue;
    }
    int64_t u, v;
    if (!read_int(p, end, u) || !read_int(p, end, v)) throw ParseError(line_no, "expected two node IDs");
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p != end) throw ParseError(line_no, "trailing characters");
    if (u < 0 || v < 0 || u >= INT32_MAX || v >= INT32_MAX) throw ParseError(line_no, "node ID out of range");
    if (u == v) throw ParseError(line_no, "self-loop on node " + std::to_string(u));
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    n = std::max<NodeId>(n, static_cast<NodeId>(std::max(u, v) + 1));
  }
  ParsedGraph out;
  out.graph = Graph(n, edges);
  out.duplicate_edges = static_cast<int>(static_cast<int64_t>(edges.size()) - out.graph.edge_count());
  return out;
}

std::string emit_edge_list(const Graph& g) {
  std::string out = "# n " + std::to_string(g.n()) + "\n";
  for (auto [u, v] : g.edges()) {
    out += std::to_string(u);
    out += ' ';
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

}  // namespace bcolor
