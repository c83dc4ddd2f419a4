#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace subsetsim::fem {

// Uniform right-triangle P1 mesh of the unit square, n x n cells split
// along the south-west to north-east diagonal. Left edge carries u = 0,
// right edge u = 1, top and bottom are natural (zero-flux) boundaries.
class SquareMesh {
public:
    explicit SquareMesh(int n) : n_(n), h_(1.0 / n) {
        if (n < 1) throw std::invalid_argument("SquareMesh: n must be >= 1");
        build();
    }

    int n() const { return n_; }
    double h() const { return h_; }
    int n_nodes() const { return (n_ + 1) * (n_ + 1); }
    int n_triangles() const { return 2 * n_ * n_; }

    int node_id(int ix, int iy) const { return iy * (n_ + 1) + ix; }
    double node_x(int id) const { return (id % (n_ + 1)) * h_; }
    double node_y(int id) const { return (id / (n_ + 1)) * h_; }
    bool on_left(int id) const { return id % (n_ + 1) == 0; }
    bool on_right(int id) const { return id % (n_ + 1) == n_; }

    struct Triangle {
        std::array<int, 3> nodes;
        double cx, cy;  // centroid, the coefficient sample point
    };
    const std::vector<Triangle>& triangles() const { return tris_; }

    // local stiffness of triangle t for unit coefficient
    const Eigen::Matrix3d& local_stiffness(std::size_t t) const {
        return (t & 1u) ? local_b_ : local_a_;
    }

    const std::vector<int>& free_nodes() const { return free_; }
    int free_index(int node) const { return free_index_[static_cast<std::size_t>(node)]; }

private:
    void build() {
        tris_.reserve(static_cast<std::size_t>(n_triangles()));
        for (int iy = 0; iy < n_; ++iy) {
            for (int ix = 0; ix < n_; ++ix) {
                int a = node_id(ix, iy), b = node_id(ix + 1, iy);
                int c = node_id(ix + 1, iy + 1), d = node_id(ix, iy + 1);
                double x0 = ix * h_, y0 = iy * h_;
                tris_.push_back({{a, b, c}, x0 + 2.0 * h_ / 3.0, y0 + h_ / 3.0});
                tris_.push_back({{a, c, d}, x0 + h_ / 3.0, y0 + 2.0 * h_ / 3.0});
            }
        }
        local_a_ = stiffness_for({{{0.0, 0.0}, {h_, 0.0}, {h_, h_}}});
        local_b_ = stiffness_for({{{0.0, 0.0}, {h_, h_}, {0.0, h_}}});

        free_index_.assign(static_cast<std::size_t>(n_nodes()), -1);
        for (int id = 0; id < n_nodes(); ++id) {
            if (!on_left(id) && !on_right(id)) {
                free_index_[static_cast<std::size_t>(id)] = static_cast<int>(free_.size());
                free_.push_back(id);
            }
        }
    }

    static Eigen::Matrix3d stiffness_for(const std::array<std::array<double, 2>, 3>& v) {
        const double x1 = v[0][0], y1 = v[0][1], x2 = v[1][0], y2 = v[1][1], x3 = v[2][0], y3 = v[2][1];
        const double det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
        const double area = 0.5 * std::fabs(det);
        Eigen::Matrix<double, 2, 3> grads;
        grads << (y2 - y3), (y3 - y1), (y1 - y2), (x3 - x2), (x1 - x3), (x2 - x1);
        grads /= det;
        Eigen::Matrix3d k;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) k(i, j) = area * grads.col(i).dot(grads.col(j));
        return k;
    }

    int n_;
    double h_;
    std::vector<Triangle> tris_;
    Eigen::Matrix3d local_a_, local_b_;
    std::vector<int> free_;
    std::vector<int> free_index_;
};

// Solves -div(A grad u) = 0 with u = 0 on the left edge, u = 1 on the right
// edge and natural conditions elsewhere; A is piecewise constant per
// element (one-point centroid rule). Returns nodal values.
inline Eigen::VectorXd solve_darcy(const SquareMesh& mesh, const Eigen::VectorXd& coeff_per_element) {
    const auto& tris = mesh.triangles();
    if (coeff_per_element.size() != static_cast<Eigen::Index>(tris.size()))
        throw std::invalid_argument("solve_darcy: one coefficient per element required");

    const int nf = static_cast<int>(mesh.free_nodes().size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(tris.size() * 9);

    for (std::size_t t = 0; t < tris.size(); ++t) {
        const double a = coeff_per_element[static_cast<Eigen::Index>(t)];
        if (!(a > 0.0)) throw std::invalid_argument("solve_darcy: coefficient must be positive");
        const Eigen::Matrix3d& k = mesh.local_stiffness(t);
        const auto& nd = tris[t].nodes;
        for (int i = 0; i < 3; ++i) {
            const int fi = mesh.free_index(nd[static_cast<std::size_t>(i)]);
            if (fi < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int nj = nd[static_cast<std::size_t>(j)];
                const double kij = a * k(i, j);
                if (mesh.free_index(nj) >= 0) {
                    trips.emplace_back(fi, mesh.free_index(nj), kij);
                } else if (mesh.on_right(nj)) {
                    rhs[fi] -= kij;  // Dirichlet lift: u = 1 on the right edge
                }
            }
        }
    }

    Eigen::SparseMatrix<double> K(nf, nf);
    K.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(K);
    if (solver.info() != Eigen::Success) throw std::runtime_error("solve_darcy: factorization failed");
    Eigen::VectorXd uf = solver.solve(rhs);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh.n_nodes());
    for (int id = 0; id < mesh.n_nodes(); ++id) {
        if (mesh.on_right(id)) u[id] = 1.0;
    }
    for (int i = 0; i < nf; ++i) u[mesh.free_nodes()[static_cast<std::size_t>(i)]] = uf[i];
    return u;
}

// Exact integration of the P1 interpolant over an axis-aligned box:
// each triangle is clipped against the box (Sutherland-Hodgman) and the
// clipped polygon contributes fan-triangle areas times vertex means.
// Precomputed as per-node weights so per-sample work is a sparse dot.
class BoxIntegrator {
public:
    BoxIntegrator(const SquareMesh& mesh, double x0, double x1, double y0, double y1) : area_((x1 - x0) * (y1 - y0)) {
        if (!(x1 > x0 && y1 > y0)) throw std::invalid_argument("BoxIntegrator: empty box");
        using P = std::array<double, 2>;
        const auto& tris = mesh.triangles();
        std::vector<double> weights(static_cast<std::size_t>(mesh.n_nodes()), 0.0);

        for (std::size_t t = 0; t < tris.size(); ++t) {
            const auto& nd = tris[t].nodes;
            std::array<P, 3> v;
            for (int i = 0; i < 3; ++i)
                v[static_cast<std::size_t>(i)] = {mesh.node_x(nd[static_cast<std::size_t>(i)]),
                                                  mesh.node_y(nd[static_cast<std::size_t>(i)])};
            std::vector<P> poly(v.begin(), v.end());
            auto clip = [&poly](auto inside, auto intersect) {
                std::vector<P> out;
                for (std::size_t i = 0; i < poly.size(); ++i) {
                    const P& cur = poly[i];
                    const P& nxt = poly[(i + 1) % poly.size()];
                    const bool cin = inside(cur), nin = inside(nxt);
                    if (cin) out.push_back(cur);
                    if (cin != nin) out.push_back(intersect(cur, nxt));
                }
                poly = std::move(out);
            };
            auto cut_x = [&clip](double bound, bool keep_below) {
                clip([=](const P& p) { return keep_below ? p[0] <= bound : p[0] >= bound; },
                     [=](const P& a, const P& b) {
                         double s = (bound - a[0]) / (b[0] - a[0]);
                         return P{bound, a[1] + s * (b[1] - a[1])};
                     });
            };
            auto cut_y = [&clip](double bound, bool keep_below) {
                clip([=](const P& p) { return keep_below ? p[1] <= bound : p[1] >= bound; },
                     [=](const P& a, const P& b) {
                         double s = (bound - a[1]) / (b[1] - a[1]);
                         return P{a[0] + s * (b[0] - a[0]), bound};
                     });
            };
            cut_x(x0, false);
            if (poly.empty()) continue;
            cut_x(x1, true);
            if (poly.empty()) continue;
            cut_y(y0, false);
            if (poly.empty()) continue;
            cut_y(y1, true);
            if (poly.size() < 3) continue;

            // barycentric coordinates in the parent triangle
            const double x1t = v[0][0], y1t = v[0][1];
            const double det = (v[1][0] - x1t) * (v[2][1] - y1t) - (v[2][0] - x1t) * (v[1][1] - y1t);
            auto bary = [&](const P& p) {
                const double l1 = ((p[0] - x1t) * (v[2][1] - y1t) - (v[2][0] - x1t) * (p[1] - y1t)) / det;
                const double l2 = ((v[1][0] - x1t) * (p[1] - y1t) - (p[0] - x1t) * (v[1][1] - y1t)) / det;
                return std::array<double, 3>{1.0 - l1 - l2, l1, l2};
            };

            for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                const P& a = poly[0];
                const P& b = poly[i];
                const P& c = poly[i + 1];
                const double sub_area =
                    0.5 * std::fabs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
                if (sub_area == 0.0) continue;
                auto ba = bary(a), bb = bary(b), bc = bary(c);
                for (int m = 0; m < 3; ++m) {
                    weights[static_cast<std::size_t>(nd[static_cast<std::size_t>(m)])] +=
                        sub_area / 3.0 *
                        (ba[static_cast<std::size_t>(m)] + bb[static_cast<std::size_t>(m)] +
                         bc[static_cast<std::size_t>(m)]);
                }
            }
        }

        for (std::size_t id = 0; id < weights.size(); ++id)
            if (weights[id] != 0.0) entries_.emplace_back(static_cast<int>(id), weights[id]);
    }

    // mean of the interpolant over the box
    double mean(const Eigen::VectorXd& u) const {
        double acc = 0.0;
        for (const auto& [id, w] : entries_) acc += w * u[id];
        return acc / area_;
    }

    double box_area() const { return area_; }

private:
    double area_;
    std::vector<std::pair<int, double>> entries_;
};

}  // namespace subsetsim::fem
