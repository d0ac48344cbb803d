#include "chfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace chfem {

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

double signed_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).cross(c - a);
}

// Leaf adjacency: up to two leaves per undirected edge.
struct EdgeAdjacency {
  std::unordered_map<std::uint64_t, std::array<int, 2>> map;

  void add(std::uint64_t key, int node) {
    auto& slots = map.try_emplace(key, std::array<int, 2>{-1, -1}).first->second;
    if (slots[0] == -1) slots[0] = node;
    else if (slots[1] == -1) slots[1] = node;
    else throw std::runtime_error("mesh: edge shared by more than two triangles");
  }
  void remove(std::uint64_t key, int node) {
    auto it = map.find(key);
    if (it == map.end()) throw std::logic_error("mesh: adjacency bookkeeping lost an edge");
    auto& slots = it->second;
    if (slots[0] == node) slots[0] = slots[1];
    else if (slots[1] != node) throw std::logic_error("mesh: adjacency bookkeeping lost a node");
    slots[1] = -1;
    if (slots[0] == -1) map.erase(it);
  }
  int other(std::uint64_t key, int node) const {
    auto it = map.find(key);
    if (it == map.end()) return -1;
    const auto& slots = it->second;
    if (slots[0] == node) return slots[1];
    if (slots[1] == node) return slots[0];
    return slots[0];  // node not on this edge; caller knows what it asked for
  }
};

// Strict total order on edges used to pick the initial refinement edge:
// longer first, ties broken by the vertex pair. Guarantees the compatibility
// chase cannot cycle on the original triangles.
struct EdgeOrder {
  double len2;
  int lo, hi;
  bool operator<(const EdgeOrder& o) const {
    if (len2 != o.len2) return len2 < o.len2;
    if (lo != o.lo) return lo < o.lo;
    return hi < o.hi;
  }
};

EdgeOrder edge_order(const std::vector<Vec2>& verts, int a, int b) {
  int lo = std::min(a, b), hi = std::max(a, b);
  return {(verts[a] - verts[b]).norm2(), lo, hi};
}

// Rotates the triple so the maximal edge becomes (v1, v2). Rotations keep
// orientation.
std::array<int, 3> rotate_to_refinement(const std::vector<Vec2>& verts,
                                        std::array<int, 3> t) {
  EdgeOrder e0 = edge_order(verts, t[1], t[2]);
  EdgeOrder e1 = edge_order(verts, t[2], t[0]);
  EdgeOrder e2 = edge_order(verts, t[0], t[1]);
  if (e1 < e0 && e2 < e0) return t;
  if (e0 < e1 && e2 < e1) return {t[1], t[2], t[0]};
  return {t[2], t[0], t[1]};
}

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_(std::move(boundary_edges)) {
  origins_.resize(vertices_.size());
  for (std::size_t i = 0; i < origins_.size(); ++i)
    origins_[i].old_index = static_cast<int>(i);
  validate();
}

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles_[t];
  return 0.5 * signed_area2(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < triangle_count(); ++t) a += triangle_area(t);
  return a;
}

double Mesh::triangle_h(int t) const {
  const auto& tri = triangles_[t];
  double h2 = 0.0;
  for (int e = 0; e < 3; ++e) {
    double l2 = (vertices_[tri[e]] - vertices_[tri[(e + 1) % 3]]).norm2();
    h2 = std::max(h2, l2);
  }
  return std::sqrt(h2);
}

Vec2 Mesh::centroid(int t) const {
  const auto& tri = triangles_[t];
  return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) * (1.0 / 3.0);
}

void Mesh::validate() const {
  const int nv = vertex_count();
  for (int t = 0; t < triangle_count(); ++t) {
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        throw std::runtime_error("mesh: triangle " + std::to_string(t) +
                                 " has vertex index out of range");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw std::runtime_error("mesh: triangle " + std::to_string(t) + " is degenerate");
    double a2 = signed_area2(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (!(a2 > 0.0))
      throw std::runtime_error("mesh: triangle " + std::to_string(t) +
                               " is inverted or has zero area");
  }

  // Edge incidence: interior edges twice, boundary edges once, and the
  // boundary list must be exactly the incidence-one set.
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(triangles_.size() * 2);
  for (const auto& tri : triangles_)
    for (int e = 0; e < 3; ++e)
      ++count[edge_key(tri[e], tri[(e + 1) % 3])];

  std::unordered_map<std::uint64_t, int> boundary_seen;
  for (std::size_t i = 0; i < boundary_.size(); ++i) {
    const auto& be = boundary_[i];
    if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv || be.a == be.b)
      throw std::runtime_error("mesh: boundary edge " + std::to_string(i) +
                               " has bad vertex indices");
    auto key = edge_key(be.a, be.b);
    if (!boundary_seen.emplace(key, static_cast<int>(i)).second)
      throw std::runtime_error("mesh: boundary edge listed twice");
    auto it = count.find(key);
    if (it == count.end())
      throw std::runtime_error("mesh: boundary edge " + std::to_string(i) +
                               " is not an edge of any triangle");
    if (it->second != 1)
      throw std::runtime_error("mesh: boundary edge " + std::to_string(i) +
                               " is interior (shared by two triangles)");
  }
  for (const auto& [key, c] : count) {
    if (c > 2) throw std::runtime_error("mesh: non-conforming edge (more than two triangles)");
    if (c == 1 && !boundary_seen.count(key))
      throw std::runtime_error("mesh: unlabeled boundary edge");
  }

  if (!forest_.empty()) {
    if (tri_node_.size() != triangles_.size())
      throw std::runtime_error("mesh: forest bookkeeping out of sync");
    for (int t = 0; t < triangle_count(); ++t) {
      const ForestNode& n = forest_[tri_node_[t]];
      if (n.child[0] != -1 || n.v != triangles_[t])
        throw std::runtime_error("mesh: triangle does not match its forest leaf");
    }
  }
}

Mesh generate_rectangle(double lx, double ly, int nx, int ny,
                        const RectangleLabels& labels) {
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("generate_rectangle: sides must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("generate_rectangle: need at least one cell per side");

  std::vector<Vec2> verts;
  verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts.emplace_back(lx * i / nx, ly * j / ny);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int v00 = vid(i, j), v10 = vid(i + 1, j);
      int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      tris.push_back({v00, v10, v11});
      tris.push_back({v00, v11, v01});
    }
  }

  std::vector<BoundaryEdge> bedges;
  for (int i = 0; i < nx; ++i) bedges.push_back({vid(i, 0), vid(i + 1, 0), labels.bottom});
  for (int j = 0; j < ny; ++j) bedges.push_back({vid(nx, j), vid(nx, j + 1), labels.right});
  for (int i = nx; i > 0; --i) bedges.push_back({vid(i, ny), vid(i - 1, ny), labels.top});
  for (int j = ny; j > 0; --j) bedges.push_back({vid(0, j), vid(0, j - 1), labels.left});

  return Mesh(std::move(verts), std::move(tris), std::move(bedges));
}

namespace {

BoundaryTag parse_tag(const std::string& s, int line_no) {
  if (s == "solid") return BoundaryTag::Solid;
  if (s == "open") return BoundaryTag::Open;
  throw std::runtime_error("mesh file line " + std::to_string(line_no) +
                           ": unknown boundary tag '" + s + "' (expected solid|open)");
}

// Strips comments, returns the next content-bearing line.
bool next_line(std::istream& in, std::string& out, int& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    out = line;
    return true;
  }
  return false;
}

}  // namespace

Mesh import_mesh(const std::filesystem::path& path, MeshFileFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_mesh: cannot open " + path.string());
  return import_mesh(in, format);
}

Mesh import_mesh(std::istream& in, MeshFileFormat format) {
  if (format != MeshFileFormat::Text)
    throw std::invalid_argument("import_mesh: unsupported format");

  int line_no = 0;
  std::string line;
  auto expect_section = [&](const char* name) -> std::size_t {
    if (!next_line(in, line, line_no))
      throw std::runtime_error("mesh file: missing '" + std::string(name) + "' section");
    std::istringstream ss(line);
    std::string word;
    long long n = -1;
    ss >> word >> n;
    if (word != name || n < 0)
      throw std::runtime_error("mesh file line " + std::to_string(line_no) +
                               ": expected '" + std::string(name) + " <count>'");
    return static_cast<std::size_t>(n);
  };

  std::size_t nv = expect_section("vertices");
  std::vector<Vec2> verts(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_line(in, line, line_no))
      throw std::runtime_error("mesh file: truncated vertex list");
    std::istringstream ss(line);
    if (!(ss >> verts[i].x >> verts[i].y))
      throw std::runtime_error("mesh file line " + std::to_string(line_no) + ": bad vertex");
  }

  std::size_t nt = expect_section("triangles");
  std::vector<std::array<int, 3>> tris(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    if (!next_line(in, line, line_no))
      throw std::runtime_error("mesh file: truncated triangle list");
    std::istringstream ss(line);
    if (!(ss >> tris[i][0] >> tris[i][1] >> tris[i][2]))
      throw std::runtime_error("mesh file line " + std::to_string(line_no) + ": bad triangle");
  }

  std::size_t nb = expect_section("boundary");
  std::vector<BoundaryEdge> bedges(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    if (!next_line(in, line, line_no))
      throw std::runtime_error("mesh file: truncated boundary list");
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> bedges[i].a >> bedges[i].b >> tag >> bedges[i].label.sub_id))
      throw std::runtime_error("mesh file line " + std::to_string(line_no) + ": bad boundary edge");
    bedges[i].label.tag = parse_tag(tag, line_no);
  }

  return Mesh(std::move(verts), std::move(tris), std::move(bedges));
}

void export_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_mesh: cannot open " + path.string());
  export_mesh(mesh, out);
  if (!out) throw std::runtime_error("export_mesh: write failed for " + path.string());
}

void export_mesh(const Mesh& mesh, std::ostream& out) {
  char buf[80];
  out << "vertices " << mesh.vertex_count() << "\n";
  for (const auto& v : mesh.vertices()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
    out << buf;
  }
  out << "triangles " << mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles())
    out << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  out << "boundary " << mesh.boundary_edges().size() << "\n";
  for (const auto& be : mesh.boundary_edges())
    out << be.a << ' ' << be.b << ' '
        << (be.label.tag == BoundaryTag::Solid ? "solid" : "open") << ' '
        << be.label.sub_id << "\n";
}

namespace {

struct BisectScratch {
  std::vector<Vec2> verts;
  std::vector<ForestNode> nodes;
  std::vector<VertexOrigin> origins;
  EdgeAdjacency adj;
  std::unordered_map<std::uint64_t, int> boundary_at;  // edge key -> index in bedges
  std::vector<BoundaryEdge> bedges;

  bool is_leaf(int n) const { return nodes[n].child[0] == -1; }

  void add_leaf_edges(int n) {
    const auto& v = nodes[n].v;
    for (int e = 0; e < 3; ++e) adj.add(edge_key(v[e], v[(e + 1) % 3]), n);
  }
  void remove_leaf_edges(int n) {
    const auto& v = nodes[n].v;
    for (int e = 0; e < 3; ++e) adj.remove(edge_key(v[e], v[(e + 1) % 3]), n);
  }

  // Splits leaf n at the midpoint vertex mv of its refinement edge.
  void split(int n, int mv) {
    auto [v0, v1, v2] = nodes[n].v;
    remove_leaf_edges(n);
    int c1 = static_cast<int>(nodes.size());
    nodes.push_back({{mv, v0, v1}, n, {-1, -1}, -1});
    int c2 = static_cast<int>(nodes.size());
    nodes.push_back({{mv, v2, v0}, n, {-1, -1}, -1});
    nodes[n].child = {c1, c2};
    nodes[n].midpoint = mv;
    add_leaf_edges(c1);
    add_leaf_edges(c2);
  }
};

}  // namespace

Mesh bisect(const Mesh& mesh, const std::vector<int>& marked) {
  if (marked.empty()) return mesh;
  for (int t : marked)
    if (t < 0 || t >= mesh.triangle_count())
      throw std::invalid_argument("bisect: marked triangle id out of range");

  BisectScratch s;
  s.verts = mesh.vertices();
  s.bedges = mesh.boundary_edges();
  s.origins.resize(s.verts.size());
  for (std::size_t i = 0; i < s.origins.size(); ++i)
    s.origins[i].old_index = static_cast<int>(i);

  std::vector<int> tri_node;
  if (mesh.forest().empty()) {
    // First refinement of this mesh: seed roots, choosing each triangle's
    // maximal edge (strict total order) as the refinement edge.
    s.nodes.reserve(mesh.triangle_count() * 3);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      auto tri = rotate_to_refinement(s.verts, mesh.triangles()[t]);
      s.nodes.push_back({tri, -1, {-1, -1}, -1});
      tri_node.push_back(t);
    }
  } else {
    s.nodes = mesh.forest();
    tri_node = mesh.tri_node_;
  }

  for (int n = 0; n < static_cast<int>(s.nodes.size()); ++n)
    if (s.is_leaf(n)) s.add_leaf_edges(n);
  for (std::size_t i = 0; i < s.bedges.size(); ++i) {
    if (!s.boundary_at.emplace(edge_key(s.bedges[i].a, s.bedges[i].b), static_cast<int>(i)).second)
      throw std::runtime_error("bisect: duplicate boundary edge");
  }

  std::vector<int> targets;
  targets.reserve(marked.size());
  for (int t : marked) targets.push_back(tri_node[t]);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  const std::size_t guard_cap = 64 * (s.nodes.size() + targets.size()) + 1024;
  std::size_t guard = 0;
  std::vector<int> stack;

  for (int target : targets) {
    if (!s.is_leaf(target)) continue;  // closure already split it
    stack.assign(1, target);
    while (!stack.empty()) {
      if (++guard > guard_cap)
        throw std::logic_error("bisect: conforming closure failed to terminate");
      int n = stack.back();
      if (!s.is_leaf(n)) {
        stack.pop_back();
        continue;
      }
      auto [v0, v1, v2] = s.nodes[n].v;
      auto key = edge_key(v1, v2);
      int partner = s.adj.other(key, n);
      if (partner != -1) {
        const auto& pv = s.nodes[partner].v;
        if (edge_key(pv[1], pv[2]) != key) {
          // Incompatible neighbour: refine it first; a child with this edge
          // as refinement edge appears, and we revisit n.
          stack.push_back(partner);
          continue;
        }
      }
      int mv = static_cast<int>(s.verts.size());
      s.verts.push_back((s.verts[v1] + s.verts[v2]) * 0.5);
      s.origins.push_back({-1, std::min(v1, v2), std::max(v1, v2)});
      s.split(n, mv);
      if (partner != -1) {
        s.split(partner, mv);
      } else if (auto it = s.boundary_at.find(key); it != s.boundary_at.end()) {
        int idx = it->second;
        BoundaryEdge old = s.bedges[idx];
        s.boundary_at.erase(it);
        s.bedges[idx] = {old.a, mv, old.label};
        s.boundary_at[edge_key(old.a, mv)] = idx;
        s.bedges.push_back({mv, old.b, old.label});
        s.boundary_at[edge_key(mv, old.b)] = static_cast<int>(s.bedges.size()) - 1;
      }
      stack.pop_back();
    }
  }

  Mesh out;
  out.vertices_ = std::move(s.verts);
  out.boundary_ = std::move(s.bedges);
  out.forest_ = std::move(s.nodes);
  out.origins_ = std::move(s.origins);
  for (int n = 0; n < static_cast<int>(out.forest_.size()); ++n) {
    if (out.forest_[n].child[0] == -1) {
      out.tri_node_.push_back(n);
      out.triangles_.push_back(out.forest_[n].v);
    }
  }
  out.validate();
  return out;
}

Mesh coarsen(const Mesh& mesh, const std::vector<int>& marked) {
  if (mesh.forest().empty() || marked.empty()) return mesh;
  for (int t : marked)
    if (t < 0 || t >= mesh.triangle_count())
      throw std::invalid_argument("coarsen: marked triangle id out of range");

  std::vector<ForestNode> nodes = mesh.forest();
  std::vector<bool> alive(nodes.size(), true);
  std::vector<bool> node_marked(nodes.size(), false);
  for (int t : marked) node_marked[mesh.tri_node_[t]] = true;

  std::vector<bool> vertex_dead(mesh.vertex_count(), false);

  std::vector<BoundaryEdge> bedges = mesh.boundary_edges();
  std::unordered_map<std::uint64_t, int> boundary_at;
  for (std::size_t i = 0; i < bedges.size(); ++i)
    boundary_at[edge_key(bedges[i].a, bedges[i].b)] = static_cast<int>(i);
  std::vector<bool> bedge_dead(bedges.size(), false);

  bool merged_any = true;
  while (merged_any) {
    merged_any = false;

    // Leaves around each vertex.
    std::unordered_map<int, std::vector<int>> vertex_leaves;
    for (int n = 0; n < static_cast<int>(nodes.size()); ++n) {
      if (!alive[n] || nodes[n].child[0] != -1) continue;
      for (int v : nodes[n].v) vertex_leaves[v].push_back(n);
    }

    // Candidate parents: both children are marked leaves.
    std::unordered_map<int, std::vector<int>> parents_of_midpoint;
    for (int n = 0; n < static_cast<int>(nodes.size()); ++n) {
      if (!alive[n] || nodes[n].child[0] == -1) continue;
      int c1 = nodes[n].child[0], c2 = nodes[n].child[1];
      bool ok = alive[c1] && alive[c2] &&
                nodes[c1].child[0] == -1 && nodes[c2].child[0] == -1 &&
                node_marked[c1] && node_marked[c2];
      if (ok) parents_of_midpoint[nodes[n].midpoint].push_back(n);
    }

    for (auto& [mv, parents] : parents_of_midpoint) {
      auto it = vertex_leaves.find(mv);
      if (it == vertex_leaves.end()) continue;
      std::set<int> incident(it->second.begin(), it->second.end());
      std::set<int> children;
      for (int p : parents) {
        children.insert(nodes[p].child[0]);
        children.insert(nodes[p].child[1]);
      }
      if (incident != children) continue;  // someone else still uses the vertex

      for (int p : parents) {
        alive[nodes[p].child[0]] = false;
        alive[nodes[p].child[1]] = false;
        nodes[p].child = {-1, -1};
        nodes[p].midpoint = -1;
        node_marked[p] = true;  // cascaded coarsening
      }
      vertex_dead[mv] = true;

      if (parents.size() == 1) {
        // Refinement edge was a boundary edge: merge its two halves back.
        const auto& pv = nodes[parents[0]].v;
        auto k1 = edge_key(pv[1], mv), k2 = edge_key(mv, pv[2]);
        auto i1 = boundary_at.find(k1), i2 = boundary_at.find(k2);
        if (i1 == boundary_at.end() || i2 == boundary_at.end())
          throw std::logic_error("coarsen: boundary halves missing");
        BoundaryLabel label = bedges[i1->second].label;
        if (!(label == bedges[i2->second].label))
          throw std::logic_error("coarsen: boundary halves carry different labels");
        bedge_dead[i1->second] = true;
        bedge_dead[i2->second] = true;
        boundary_at.erase(k1);
        boundary_at.erase(k2);
        bedges.push_back({pv[1], pv[2], label});
        bedge_dead.push_back(false);
        boundary_at[edge_key(pv[1], pv[2])] = static_cast<int>(bedges.size()) - 1;
      }
      merged_any = true;
    }
  }

  // Compact vertices, nodes and boundary edges.
  std::vector<int> vmap(mesh.vertex_count(), -1);
  Mesh out;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (vertex_dead[v]) continue;
    vmap[v] = static_cast<int>(out.vertices_.size());
    out.vertices_.push_back(mesh.vertices()[v]);
    out.origins_.push_back({v, -1, -1});
  }

  std::vector<int> nmap(nodes.size(), -1);
  for (int n = 0; n < static_cast<int>(nodes.size()); ++n) {
    if (!alive[n]) continue;
    nmap[n] = static_cast<int>(out.forest_.size());
    out.forest_.push_back(nodes[n]);
  }
  for (auto& node : out.forest_) {
    for (auto& v : node.v) v = vmap[v];
    if (node.parent != -1) node.parent = nmap[node.parent];
    if (node.child[0] != -1) {
      node.child[0] = nmap[node.child[0]];
      node.child[1] = nmap[node.child[1]];
      node.midpoint = vmap[node.midpoint];
    }
  }
  for (int n = 0; n < static_cast<int>(out.forest_.size()); ++n) {
    if (out.forest_[n].child[0] == -1) {
      out.tri_node_.push_back(n);
      out.triangles_.push_back(out.forest_[n].v);
    }
  }
  for (std::size_t i = 0; i < bedges.size(); ++i) {
    if (bedge_dead[i]) continue;
    out.boundary_.push_back({vmap[bedges[i].a], vmap[bedges[i].b], bedges[i].label});
  }
  out.validate();
  return out;
}

std::vector<BoundaryLabel> distinct_boundary_labels(const Mesh& mesh, BoundaryTag tag) {
  std::vector<BoundaryLabel> out;
  for (const BoundaryEdge& be : mesh.boundary_edges()) {
    if (be.label.tag != tag) continue;
    if (std::find(out.begin(), out.end(), be.label) == out.end()) out.push_back(be.label);
  }
  return out;
}

}  // namespace chfem
