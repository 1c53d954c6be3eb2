#pragma once

#include "stabocp/common.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace stabocp {

/// An edge of the triangulation. `elements[1]` is -1 on the boundary.
struct Edge {
  std::array<int, 2> vertices{};  // sorted ascending
  std::array<int, 2> elements{-1, -1};
  std::array<int, 2> local{-1, -1};  // local edge index inside each owner
  bool boundary() const { return elements[1] < 0; }
};

/// Conforming triangulation of a planar polygon.
///
/// Local convention: local edge j of an element is the edge opposite local
/// vertex j, i.e. it joins local vertices (j+1)%3 and (j+2)%3. Elements are
/// stored counter-clockwise. The mesh is immutable once built.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> elements,
       std::vector<int> parent = {}, std::vector<int> generation = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const Vec2& vertex(int v) const { return vertices_[v]; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::array<int, 3>& element(int k) const { return elements_[k]; }
  const std::vector<std::array<int, 3>>& elements() const { return elements_; }
  const std::array<int, 3>& element_edges(int k) const { return element_edges_[k]; }
  const Edge& edge(int e) const { return edges_[e]; }

  double area(int k) const { return area_[k]; }
  /// Element diameter h_K (its longest edge).
  double diameter(int k) const { return diameter_[k]; }
  double edge_length(int e) const { return edge_length_[e]; }
  /// Outward unit normal of local edge j of element k.
  const Vec2& normal(int k, int j) const { return normal_[3 * k + j]; }
  /// Gradient of the barycentric coordinate of local vertex j (constant on k).
  const Vec2& grad_lambda(int k, int j) const { return grad_lambda_[3 * k + j]; }
  /// Element across local edge j, or -1 on the boundary.
  int neighbor(int k, int j) const;

  bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
  /// Ordered fan of elements around v (see patch()).
  std::span<const int> vertex_elements(int v) const;

  /// Index of the element in the previous mesh this one was cut from.
  int parent(int k) const { return parent_[k]; }
  /// Number of bisections separating k from the initial mesh.
  int generation(int k) const { return generation_[k]; }

  int local_index(int k, int v) const;
  Vec2 point(int k, const std::array<double, 3>& bary) const;
  double total_area() const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<std::array<int, 3>> element_edges_;
  std::vector<Edge> edges_;
  std::vector<double> area_, diameter_, edge_length_;
  std::vector<Vec2> normal_, grad_lambda_;
  std::vector<char> boundary_vertex_;
  std::vector<int> fan_offset_, fan_;
  std::vector<int> parent_, generation_;
};

/// Structured triangulation of [lo, hi] with nx*ny cells, each split along its
/// bottom-left to top-right diagonal.
Mesh build_rectangle_mesh(int nx, int ny, const Vec2& lo = Vec2(0, 0), const Vec2& hi = Vec2(1, 1));

/// Longest-edge bisection of the marked elements followed by conforming closure.
Mesh refine(const Mesh& mesh, std::span<const int> marked);

/// Bisects every element twice, which halves the mesh size of the
/// criss-cross family. Parents refer to the input mesh.
Mesh refine_uniform(const Mesh& mesh);

/// Elements containing vertex v. Interior vertices give a closed
/// counter-clockwise fan starting at the lowest element index; boundary
/// vertices give an open fan whose first and last entries own a boundary edge
/// through v.
std::vector<int> patch(const Mesh& mesh, int v);

/// Throws NumericalError describing the first violated mesh invariant.
void check_mesh(const Mesh& mesh);

/// Legacy ASCII VTK unstructured grid with optional point/cell data blocks.
struct VtkField {
  std::string name;
  std::vector<double> values;
};
void write_vtk(std::ostream& out, const Mesh& mesh, std::span<const VtkField> point_data = {},
               std::span<const VtkField> cell_data = {});
void write_vtk(const std::string& path, const Mesh& mesh, std::span<const VtkField> point_data = {},
               std::span<const VtkField> cell_data = {});

}  // namespace stabocp
