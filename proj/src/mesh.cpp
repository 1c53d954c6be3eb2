#include "stabocp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace stabocp {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> elements,
           std::vector<int> parent, std::vector<int> generation)
    : vertices_(std::move(vertices)), elements_(std::move(elements)) {
  const int nv = num_vertices();
  const int ne = num_elements();
  for (auto& el : elements_) {
    for (int v : el)
      if (v < 0 || v >= nv) throw InvalidInput("element references vertex out of range");
    const double a = signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
    if (a < 0) std::swap(el[1], el[2]);
  }

  if (parent.empty()) {
    parent_.resize(ne);
    for (int k = 0; k < ne; ++k) parent_[k] = k;
  } else {
    parent_ = std::move(parent);
  }
  generation_ = generation.empty() ? std::vector<int>(ne, 0) : std::move(generation);
  if (static_cast<int>(parent_.size()) != ne || static_cast<int>(generation_.size()) != ne)
    throw InvalidInput("history arrays do not match element count");

  area_.resize(ne);
  diameter_.resize(ne);
  normal_.resize(3 * ne);
  grad_lambda_.resize(3 * ne);
  element_edges_.resize(ne);

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(static_cast<std::size_t>(3 * ne));
  for (int k = 0; k < ne; ++k) {
    const auto& el = elements_[k];
    area_[k] = signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
    if (!(area_[k] > 0)) throw InvalidInput("degenerate element " + std::to_string(k));
    double h = 0;
    for (int j = 0; j < 3; ++j) {
      const int a = el[(j + 1) % 3];
      const int b = el[(j + 2) % 3];
      const Vec2 d = vertices_[b] - vertices_[a];
      const double len = d.norm();
      h = std::max(h, len);
      normal_[3 * k + j] = Vec2(d.y(), -d.x()) / len;
      grad_lambda_[3 * k + j] = -len / (2 * area_[k]) * normal_[3 * k + j];

      auto [it, fresh] = edge_index.try_emplace(edge_key(a, b), num_edges());
      if (fresh) {
        Edge e;
        e.vertices = {std::min(a, b), std::max(a, b)};
        e.elements = {k, -1};
        e.local = {j, -1};
        edges_.push_back(e);
      } else {
        Edge& e = edges_[it->second];
        if (e.elements[1] >= 0) throw InvalidInput("edge shared by more than two elements");
        e.elements[1] = k;
        e.local[1] = j;
      }
      element_edges_[k][j] = it->second;
    }
    diameter_[k] = h;
  }

  edge_length_.resize(edges_.size());
  boundary_vertex_.assign(nv, 0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& ed = edges_[e];
    edge_length_[e] = (vertices_[ed.vertices[1]] - vertices_[ed.vertices[0]]).norm();
    if (ed.boundary()) boundary_vertex_[ed.vertices[0]] = boundary_vertex_[ed.vertices[1]] = 1;
  }

  // Vertex fans, ordered by walking counter-clockwise through edge neighbours.
  std::vector<int> count(nv + 1, 0);
  for (const auto& el : elements_)
    for (int v : el) ++count[v + 1];
  fan_offset_.assign(nv + 1, 0);
  for (int v = 0; v < nv; ++v) fan_offset_[v + 1] = fan_offset_[v] + count[v + 1];
  std::vector<int> incident(fan_offset_[nv]);
  std::vector<int> fill(fan_offset_.begin(), fan_offset_.end() - 1);
  for (int k = 0; k < ne; ++k)
    for (int v : elements_[k]) incident[fill[v]++] = k;

  fan_.assign(incident.size(), -1);
  for (int v = 0; v < nv; ++v) {
    const int lo = fan_offset_[v];
    const int n = fan_offset_[v + 1] - lo;
    if (n == 0) continue;
    int start = incident[lo];  // lowest index, incident is sorted by construction
    if (boundary_vertex_[v]) {
      for (int i = 0; i < n; ++i) {
        const int k = incident[lo + i];
        const int a = local_index(k, v);
        // edge joining v and its counter-clockwise successor is local edge (a+2)%3
        if (neighbor(k, (a + 2) % 3) < 0) {
          start = k;
          break;
        }
      }
    }
    int k = start;
    for (int i = 0; i < n; ++i) {
      fan_[lo + i] = k;
      const int a = local_index(k, v);
      k = neighbor(k, (a + 1) % 3);
      if (k < 0 || k == start) {
        if (i != n - 1) throw InvalidInput("vertex fan is not a manifold neighbourhood");
        break;
      }
    }
  }
}

int Mesh::neighbor(int k, int j) const {
  const Edge& e = edges_[element_edges_[k][j]];
  return e.elements[0] == k ? e.elements[1] : e.elements[0];
}

std::span<const int> Mesh::vertex_elements(int v) const {
  return {fan_.data() + fan_offset_[v], static_cast<std::size_t>(fan_offset_[v + 1] - fan_offset_[v])};
}

int Mesh::local_index(int k, int v) const {
  const auto& el = elements_[k];
  for (int j = 0; j < 3; ++j)
    if (el[j] == v) return j;
  return -1;
}

Vec2 Mesh::point(int k, const std::array<double, 3>& bary) const {
  const auto& el = elements_[k];
  return bary[0] * vertices_[el[0]] + bary[1] * vertices_[el[1]] + bary[2] * vertices_[el[2]];
}

double Mesh::total_area() const { return pairwise_sum(area_); }

Mesh build_rectangle_mesh(int nx, int ny, const Vec2& lo, const Vec2& hi) {
  if (nx < 1 || ny < 1) throw InvalidInput("cell counts must be positive");
  if (!(hi.x() > lo.x()) || !(hi.y() > lo.y())) throw InvalidInput("degenerate rectangle");
  std::vector<Vec2> verts;
  verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts.emplace_back(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny);
  std::vector<std::array<int, 3>> els;
  els.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = j * (nx + 1) + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + nx + 1;
      const int v11 = v01 + 1;
      els.push_back({v00, v10, v11});
      els.push_back({v00, v11, v01});
    }
  return Mesh(std::move(verts), std::move(els));
}

namespace {

struct Tri {
  std::array<int, 3> v;
  int origin;
  int generation;
};

// Local index of the longest edge; near-ties go to the smallest vertex pair.
int longest_edge(const std::vector<Vec2>& x, const std::array<int, 3>& v) {
  int best = 0;
  double best_len = -1;
  std::uint64_t best_key = 0;
  for (int j = 0; j < 3; ++j) {
    const int a = v[(j + 1) % 3], b = v[(j + 2) % 3];
    const double len = (x[b] - x[a]).squaredNorm();
    const std::uint64_t key = edge_key(a, b);
    const double tol = 1e-12 * std::max(len, best_len);
    if (len > best_len + tol || (std::abs(len - best_len) <= tol && key < best_key)) {
      best = j;
      best_len = len;
      best_key = key;
    }
  }
  return best;
}

std::uint64_t longest_key(const std::vector<Vec2>& x, const std::array<int, 3>& v) {
  const int j = longest_edge(x, v);
  return edge_key(v[(j + 1) % 3], v[(j + 2) % 3]);
}

}  // namespace

Mesh refine(const Mesh& mesh, std::span<const int> marked) {
  if (mesh.num_elements() == 0) throw InvalidInput("cannot refine an empty mesh");
  std::vector<Vec2> x = mesh.vertices();
  std::vector<Tri> tris;
  tris.reserve(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k)
    tris.push_back({mesh.element(k), k, mesh.generation(k)});

  std::unordered_set<std::uint64_t> split;
  for (int k : marked) {
    if (k < 0 || k >= mesh.num_elements()) throw InvalidInput("marked element out of range");
    split.insert(longest_key(x, tris[k].v));
  }

  std::unordered_map<std::uint64_t, int> midpoint;
  while (!split.empty()) {
    // Closure: any triangle with a split edge must also split its longest edge.
    std::unordered_map<std::uint64_t, std::vector<int>> owners;
    owners.reserve(tris.size() * 2);
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
      for (int j = 0; j < 3; ++j)
        owners[edge_key(tris[t].v[(j + 1) % 3], tris[t].v[(j + 2) % 3])].push_back(t);

    std::vector<int> work;
    for (std::uint64_t key : split)
      for (int t : owners[key]) work.push_back(t);
    while (!work.empty()) {
      const int t = work.back();
      work.pop_back();
      const std::uint64_t key = longest_key(x, tris[t].v);
      if (split.insert(key).second)
        for (int s : owners[key]) work.push_back(s);
    }

    std::vector<Tri> next;
    next.reserve(tris.size() * 2);
    for (const Tri& tri : tris) {
      const int j = longest_edge(x, tri.v);
      const int a = tri.v[j], b = tri.v[(j + 1) % 3], c = tri.v[(j + 2) % 3];
      const std::uint64_t key = edge_key(b, c);
      if (!split.count(key)) {
        next.push_back(tri);
        continue;
      }
      auto [it, fresh] = midpoint.try_emplace(key, static_cast<int>(x.size()));
      if (fresh) x.push_back(0.5 * (x[b] + x[c]));
      const int m = it->second;
      next.push_back({{a, b, m}, tri.origin, tri.generation + 1});
      next.push_back({{a, m, c}, tri.origin, tri.generation + 1});
    }
    tris.swap(next);

    // Edges of the new triangulation that already carry a midpoint are hanging.
    split.clear();
    for (const Tri& tri : tris)
      for (int j = 0; j < 3; ++j) {
        const std::uint64_t key = edge_key(tri.v[(j + 1) % 3], tri.v[(j + 2) % 3]);
        if (midpoint.count(key)) split.insert(key);
      }
  }

  std::vector<std::array<int, 3>> els;
  std::vector<int> parent, gen;
  els.reserve(tris.size());
  parent.reserve(tris.size());
  gen.reserve(tris.size());
  for (const Tri& tri : tris) {
    els.push_back(tri.v);
    parent.push_back(tri.origin);
    gen.push_back(tri.generation);
  }
  return Mesh(std::move(x), std::move(els), std::move(parent), std::move(gen));
}

std::vector<int> patch(const Mesh& mesh, int v) {
  if (v < 0 || v >= mesh.num_vertices()) throw InvalidInput("vertex index out of range");
  auto fan = mesh.vertex_elements(v);
  return {fan.begin(), fan.end()};
}

void check_mesh(const Mesh& mesh) {
  auto fail = [](const std::string& what) { throw NumericalError("mesh invariant violated: " + what); };
  for (int k = 0; k < mesh.num_elements(); ++k) {
    if (!(mesh.area(k) > 0)) fail("nonpositive area at element " + std::to_string(k));
    Vec2 s = Vec2::Zero();
    for (int j = 0; j < 3; ++j) s += mesh.edge_length(mesh.element_edges(k)[j]) * mesh.normal(k, j);
    if (s.norm() > 1e-12 * mesh.diameter(k)) fail("normals do not close at element " + std::to_string(k));
  }
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (ed.boundary()) continue;
    const Vec2& n0 = mesh.normal(ed.elements[0], ed.local[0]);
    const Vec2& n1 = mesh.normal(ed.elements[1], ed.local[1]);
    if ((n0 + n1).norm() > 1e-12) fail("normals not opposite on edge " + std::to_string(e));
  }
  // A conforming mesh of a simply connected polygon satisfies Euler's formula.
  const long chi = static_cast<long>(mesh.num_vertices()) - mesh.num_edges() + mesh.num_elements();
  if (chi != 1) fail("Euler characteristic " + std::to_string(chi) + " (hanging node or hole)");
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.vertex_elements(v).empty()) fail("isolated vertex " + std::to_string(v));
}

void write_vtk(std::ostream& out, const Mesh& mesh, std::span<const VtkField> point_data,
               std::span<const VtkField> cell_data) {
  out << "# vtk DataFile Version 3.0\nstabocp\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec2& p : mesh.vertices()) out << p.x() << ' ' << p.y() << " 0\n";
  out << "CELLS " << mesh.num_elements() << ' ' << 4 * mesh.num_elements() << '\n';
  for (const auto& el : mesh.elements()) out << "3 " << el[0] << ' ' << el[1] << ' ' << el[2] << '\n';
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (int k = 0; k < mesh.num_elements(); ++k) out << "5\n";
  auto block = [&](const char* kind, int n, std::span<const VtkField> fields) {
    if (fields.empty()) return;
    out << kind << ' ' << n << '\n';
    for (const auto& f : fields) {
      if (static_cast<int>(f.values.size()) != n) throw InvalidInput("VTK field '" + f.name + "' has wrong size");
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) out << v << '\n';
    }
  };
  block("POINT_DATA", mesh.num_vertices(), point_data);
  block("CELL_DATA", mesh.num_elements(), cell_data);
}

void write_vtk(const std::string& path, const Mesh& mesh, std::span<const VtkField> point_data,
               std::span<const VtkField> cell_data) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path);
  write_vtk(out, mesh, point_data, cell_data);
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<int> all(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k) all[k] = k;
  const Mesh once = refine(mesh, all);
  all.resize(once.num_elements());
  for (int k = 0; k < once.num_elements(); ++k) all[k] = k;
  const Mesh twice = refine(once, all);
  std::vector<int> parent(twice.num_elements()), gen(twice.num_elements());
  for (int k = 0; k < twice.num_elements(); ++k) {
    parent[k] = once.parent(twice.parent(k));
    gen[k] = twice.generation(k);
  }
  return Mesh(twice.vertices(), twice.elements(), std::move(parent), std::move(gen));
}

}  // namespace stabocp
