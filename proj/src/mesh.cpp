#include "imfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace imfem {

namespace {

struct GaussLegendre {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

GaussLegendre gauss_legendre_for_degree(int degree) {
    switch (degree) {
    case 1:
        return {{0.0}, {2.0}};
    case 3: {
        const double a = 1.0 / std::sqrt(3.0);
        return {{-a, a}, {1.0, 1.0}};
    }
    case 5: {
        const double a = std::sqrt(3.0 / 5.0);
        return {{-a, 0.0, a}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
    }
    default:
        throw std::invalid_argument("boundary quadrature degree must be 1, 3 or 5, got " +
                                    std::to_string(degree));
    }
}

} // namespace

Mesh::Mesh(std::size_t n) : n_(n) {
    if (n == 0)
        throw std::invalid_argument("mesh needs at least one subdivision per side");

    const double h = 1.0 / static_cast<double>(n);
    const double dn = static_cast<double>(n);
    area_ = 0.5 * h * h;

    const std::size_t stride = n + 1;
    nodes_.reserve(stride * stride);
    interior_.reserve(stride * stride);
    for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
            // i/n rather than i*h so that nodes of nested meshes coincide bitwise
            nodes_.push_back({static_cast<double>(i) / dn, static_cast<double>(j) / dn});
            interior_.push_back(i != 0 && j != 0 && i != n && j != n);
        }
    }

    triangles_.reserve(2 * n * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p00 = i + j * stride;
            const std::size_t p10 = p00 + 1;
            const std::size_t p01 = p00 + stride;
            const std::size_t p11 = p01 + 1;
            triangles_.push_back({p00, p10, p11});
            triangles_.push_back({p00, p11, p01});
        }
    }

    grads_[0] = {Vec2{-dn, 0.0}, Vec2{dn, -dn}, Vec2{0.0, dn}};
    grads_[1] = {Vec2{0.0, -dn}, Vec2{dn, 0.0}, Vec2{-dn, dn}};

    boundary_edges_.reserve(4 * n);
    for (std::size_t i = 0; i < n; ++i)
        boundary_edges_.push_back({{i, i + 1}, {0.0, -1.0}, h});
    for (std::size_t j = 0; j < n; ++j)
        boundary_edges_.push_back({{n + j * stride, n + (j + 1) * stride}, {1.0, 0.0}, h});
    for (std::size_t i = n; i > 0; --i)
        boundary_edges_.push_back({{i + n * stride, i - 1 + n * stride}, {0.0, 1.0}, h});
    for (std::size_t j = n; j > 0; --j)
        boundary_edges_.push_back({{j * stride, (j - 1) * stride}, {-1.0, 0.0}, h});
}

double Mesh::signed_area(std::size_t k) const {
    const auto& t = triangles_[k];
    const Vec2 e1 = nodes_[t[1]] - nodes_[t[0]];
    const Vec2 e2 = nodes_[t[2]] - nodes_[t[0]];
    return 0.5 * (e1.x * e2.y - e1.y * e2.x);
}

Point Mesh::barycenter(std::size_t k) const {
    const auto& t = triangles_[k];
    return (1.0 / 3.0) * (nodes_[t[0]] + nodes_[t[1]] + nodes_[t[2]]);
}

Point Mesh::from_barycentric(std::size_t k, const std::array<double, 3>& lambda) const {
    const auto& t = triangles_[k];
    return lambda[0] * nodes_[t[0]] + lambda[1] * nodes_[t[1]] + lambda[2] * nodes_[t[2]];
}

std::array<double, 3> Mesh::barycentric_in(std::size_t k, const Point& x) const {
    const auto& t = triangles_[k];
    const auto& g = grads_[k & 1u];
    const double l1 = 1.0 + dot(g[1], x - nodes_[t[1]]);
    const double l2 = 1.0 + dot(g[2], x - nodes_[t[2]]);
    return {1.0 - l1 - l2, l1, l2};
}

PointLocation Mesh::locate(const Point& x) const {
    if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0))
        throw std::out_of_range("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) +
                                ") lies outside the unit square");

    const double dn = static_cast<double>(n_);
    const double sx = x.x * dn;
    const double sy = x.y * dn;
    const std::size_t i = std::min(static_cast<std::size_t>(sx), n_ - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(sy), n_ - 1);
    const double s = sx - static_cast<double>(i);
    const double t = sy - static_cast<double>(j);
    const std::size_t cell = i + j * n_;

    if (s >= t)
        return {2 * cell, {1.0 - s, s - t, t}};
    return {2 * cell + 1, {1.0 - t, s, t - s}};
}

std::vector<BoundaryQuadraturePoint> Mesh::boundary_quadrature(int degree) const {
    const GaussLegendre rule = gauss_legendre_for_degree(degree);
    std::vector<BoundaryQuadraturePoint> out;
    out.reserve(boundary_edges_.size() * rule.nodes.size());
    for (const auto& e : boundary_edges_) {
        const Point& a = nodes_[e.nodes[0]];
        const Point& b = nodes_[e.nodes[1]];
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = 0.5 * (1.0 + rule.nodes[q]);
            out.push_back({(1.0 - t) * a + t * b, 0.5 * e.length * rule.weights[q], e.normal});
        }
    }
    return out;
}

} // namespace imfem
