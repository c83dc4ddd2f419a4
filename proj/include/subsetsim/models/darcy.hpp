#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "subsetsim/fem.hpp"
#include "subsetsim/hierarchy.hpp"

namespace subsetsim {

// Log-normal Darcy flow on the unit square. The log-permeability is a
// zero-mean Gaussian field with covariance (-Laplace + tau^2)^-alpha under
// Neumann conditions, expanded in the cosine eigenbasis
//   e_ij(x, y) = n_i n_j cos(i pi x) cos(j pi y),
//   lambda_ij = (pi^2 (i^2 + j^2) + tau^2)^-alpha,
// truncated at i, j <= kl_max_index. The limit state is
//   G = y_crit - mean of u over the box B,
// approximated on a hierarchy of uniformly refined meshes with edge length
// h_k = 2^-(k+2). A mesh-0 companion (h = 1/4) is solved together with
// mesh 1 so every evaluation carries a two-level a-posteriori error
// estimate; its work is folded into the level-1 cost.
struct DarcyModelConfig {
    double tau = 0.1;
    double alpha = 1.0;
    int kl_max_index = 16;  // modes (i, j) with 0 <= i, j <= kl_max_index
    double gamma = 0.25;
    double q = 2.0;
    int max_level = 4;
    double y_crit = 0.92;
    double box_x0 = 0.4, box_x1 = 0.6, box_y0 = 0.9, box_y1 = 0.99;
    std::vector<double> level_costs = {1.0, 16.0, 256.0, 4096.0};
    double est_const = 0.0;  // 0 = (1 - gamma)^-1
};

class DarcyModel final : public LimitStateModel {
public:
    explicit DarcyModel(DarcyModelConfig cfg)
        : LimitStateModel((cfg.kl_max_index + 1) * (cfg.kl_max_index + 1),
                          AccuracySchedule(cfg.gamma, cfg.q, cfg.max_level)),
          cfg_(cfg) {
        if (cfg.level_costs.size() != static_cast<std::size_t>(cfg.max_level))
            throw std::invalid_argument("DarcyModel: one cost entry per level required");
        est_const_ = cfg.est_const > 0.0 ? cfg.est_const : 1.0 / (1.0 - cfg.gamma);
        meshes_.reserve(static_cast<std::size_t>(cfg.max_level) + 1);
        for (int m = 0; m <= cfg.max_level; ++m) {
            meshes_.push_back(std::make_unique<MeshData>(1 << (m + 2), *this));
        }
    }

    detail::LevelEval compute_level(const ParameterVector& theta, int level,
                                    const std::vector<std::optional<detail::LevelEval>>& lower) const override {
        double g_prev = std::numeric_limits<double>::quiet_NaN();
        if (level == 1) {
            g_prev = qoi_on_mesh(theta, 0);
        } else if (lower[static_cast<std::size_t>(level - 2)]) {
            g_prev = lower[static_cast<std::size_t>(level - 2)]->value;
        }
        const double g = qoi_on_mesh(theta, level);
        // two-level hierarchical estimate when a coarser value is at hand,
        // nominal bound otherwise (plain fixed-mesh evaluation)
        const double bound =
            std::isnan(g_prev) ? schedule().nominal_error(level) : est_const_ * std::fabs(g - g_prev);
        return {g, bound};
    }

    double level_cost(int level) const override { return cfg_.level_costs[static_cast<std::size_t>(level - 1)]; }

    std::string name() const override { return "darcy"; }
    const DarcyModelConfig& config() const { return cfg_; }

    double kl_eigenvalue(int i, int j) const {
        return std::pow(std::numbers::pi * std::numbers::pi * (i * i + j * j) + cfg_.tau * cfg_.tau, -cfg_.alpha);
    }

    // log-permeability field at arbitrary points (tests and diagnostics)
    double log_field_at(const ParameterVector& theta, double x, double y) const {
        const int m = cfg_.kl_max_index;
        double acc = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double nx = (i == 0 ? 1.0 : std::numbers::sqrt2) * std::cos(i * std::numbers::pi * x);
            for (int j = 0; j <= m; ++j) {
                const double ny = (j == 0 ? 1.0 : std::numbers::sqrt2) * std::cos(j * std::numbers::pi * y);
                acc += theta.coords[static_cast<std::size_t>(i * (m + 1) + j)] *
                       std::sqrt(kl_eigenvalue(i, j)) * nx * ny;
            }
        }
        return acc;
    }

    // limit state on one mesh of the hierarchy (0 = estimator companion)
    double qoi_on_mesh(const ParameterVector& theta, int mesh) const {
        const MeshData& md = *meshes_[static_cast<std::size_t>(mesh)];
        Eigen::Map<const Eigen::VectorXd> th(theta.coords.data(), static_cast<Eigen::Index>(theta.coords.size()));
        Eigen::VectorXd log_a = md.kl_basis * th;
        Eigen::VectorXd a = log_a.array().exp();
        Eigen::VectorXd u = fem::solve_darcy(md.mesh, a);
        return cfg_.y_crit - md.box.mean(u);
    }

    // nodal solve exposed for the FEM sanity checks
    Eigen::VectorXd solve_nodal(const ParameterVector& theta, int mesh) const {
        const MeshData& md = *meshes_[static_cast<std::size_t>(mesh)];
        Eigen::Map<const Eigen::VectorXd> th(theta.coords.data(), static_cast<Eigen::Index>(theta.coords.size()));
        Eigen::VectorXd a = (md.kl_basis * th).array().exp();
        return fem::solve_darcy(md.mesh, a);
    }

    const fem::SquareMesh& mesh(int m) const { return meshes_[static_cast<std::size_t>(m)]->mesh; }

    // a-posteriori estimate for the mesh-k value from the (k, k+1) pair
    double hierarchical_error_estimate(const ParameterVector& theta, int mesh_level) const {
        if (mesh_level + 1 > cfg_.max_level) throw std::invalid_argument("hierarchical_error_estimate: no finer mesh");
        const double gk = qoi_on_mesh(theta, mesh_level);
        const double gk1 = qoi_on_mesh(theta, mesh_level + 1);
        return est_const_ * std::fabs(gk1 - gk);
    }

    double estimator_constant() const { return est_const_; }

private:
    struct MeshData {
        fem::SquareMesh mesh;
        fem::BoxIntegrator box;
        Eigen::MatrixXd kl_basis;  // [element centroid] x [mode], scaled by sqrt(lambda)

        MeshData(int n, const DarcyModel& model)
            : mesh(n), box(mesh, model.cfg_.box_x0, model.cfg_.box_x1, model.cfg_.box_y0, model.cfg_.box_y1) {
            const int m = model.cfg_.kl_max_index;
            const auto& tris = mesh.triangles();
            kl_basis.resize(static_cast<Eigen::Index>(tris.size()), static_cast<Eigen::Index>((m + 1) * (m + 1)));
            std::vector<double> cx(static_cast<std::size_t>(m) + 1), cy(static_cast<std::size_t>(m) + 1);
            for (std::size_t t = 0; t < tris.size(); ++t) {
                for (int i = 0; i <= m; ++i) {
                    const double norm = i == 0 ? 1.0 : std::numbers::sqrt2;
                    cx[static_cast<std::size_t>(i)] = norm * std::cos(i * std::numbers::pi * tris[t].cx);
                    cy[static_cast<std::size_t>(i)] = norm * std::cos(i * std::numbers::pi * tris[t].cy);
                }
                for (int i = 0; i <= m; ++i)
                    for (int j = 0; j <= m; ++j)
                        kl_basis(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i * (m + 1) + j)) =
                            std::sqrt(model.kl_eigenvalue(i, j)) * cx[static_cast<std::size_t>(i)] *
                            cy[static_cast<std::size_t>(j)];
            }
        }
    };

    DarcyModelConfig cfg_;
    double est_const_;
    std::vector<std::unique_ptr<MeshData>> meshes_;
};

}  // namespace subsetsim
