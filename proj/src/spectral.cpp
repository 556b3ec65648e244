#include "relq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "relq/json_format.hpp"

namespace relq {
namespace {

bool eigen_less(const Complex& a, const Complex& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

std::vector<int> sort_order(const CVector& ev) {
    std::vector<int> order(static_cast<std::size_t>(ev.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return eigen_less(ev(i), ev(j)); });
    return order;
}

std::string describe(Complex z) {
    std::ostringstream os;
    os << format_double(z.real());
    if (z.imag() != 0.0) os << (z.imag() < 0 ? " - " : " + ") << format_double(std::abs(z.imag())) << "i";
    return os.str();
}

// Groups eigenvalues closer than `gap`; returns the cluster id of each.
std::vector<int> clusters(const CVector& ev, double gap) {
    const int d = static_cast<int>(ev.size());
    std::vector<int> parent(static_cast<std::size_t>(d));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
        return i;
    };
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            if (std::abs(ev(i) - ev(j)) <= gap) parent[static_cast<std::size_t>(find(j))] = find(i);
        }
    }
    std::vector<int> id(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) id[static_cast<std::size_t>(i)] = find(i);
    return id;
}

}  // namespace

ControllabilityReport controllability(const Matrix& A, const Matrix& B, const Tolerances& tol) {
    if (A.rows() != A.cols()) throw UsageError("spectral", "controllability: A must be square, got " +
                                                               std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
    if (B.rows() != A.rows() || B.cols() < 1) {
        throw UsageError("spectral", "controllability: dimension mismatch between A (" + std::to_string(A.rows()) +
                                         " rows) and B (" + std::to_string(B.rows()) + " rows)");
    }
    const Eigen::Index d = A.rows();
    const Eigen::Index k = B.cols();
    Matrix C(d, d * k);
    Matrix block = B;
    for (Eigen::Index i = 0; i < d; ++i) {
        C.middleCols(i * k, k) = block;
        block = A * block;
    }
    Eigen::JacobiSVD<Matrix> svd(C);
    const Vector& s = svd.singularValues();

    ControllabilityReport rep;
    rep.states = static_cast<int>(d);
    rep.singular_values.assign(s.data(), s.data() + s.size());
    const double smax = s.size() ? s(0) : 0.0;
    const double cutoff = smax * static_cast<double>(d) * tol.rank_relative;
    rep.rank = 0;
    if (smax > 0.0) {
        for (Eigen::Index i = 0; i < s.size(); ++i) rep.rank += s(i) > cutoff ? 1 : 0;
    }
    rep.full = rep.rank == rep.states;
    return rep;
}

DefectiveMatrixError::DefectiveMatrixError(Complex eigenvalue, int algebraic, int geometric)
    : RefusalError("spectral", "defective matrix: eigenvalue " + describe(eigenvalue) + " has algebraic multiplicity " +
                                   std::to_string(algebraic) + " but only " + std::to_string(geometric) +
                                   " independent eigenvector(s)"),
      eigenvalue_(eigenvalue) {}

CVector sorted_eigenvalues(const Matrix& x) {
    Eigen::EigenSolver<Matrix> es(x, false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral", "eigenvalue computation did not converge");
    const CVector ev = es.eigenvalues();
    const auto order = sort_order(ev);
    CVector out(ev.size());
    for (std::size_t i = 0; i < order.size(); ++i) out(static_cast<Eigen::Index>(i)) = ev(order[i]);
    return out;
}

SpectralSplit spectral_split(const Matrix& X, double beta, const Tolerances& tol) {
    if (X.rows() != X.cols() || X.rows() == 0) throw UsageError("spectral", "spectral_split: matrix must be square and non-empty");
    if (!(beta > 0.0 && beta <= 1.0)) throw UsageError("spectral", "spectral_split: beta must lie in (0, 1]");
    if (!X.allFinite()) throw UsageError("spectral", "spectral_split: matrix has non-finite entries");

    const Eigen::Index d = X.rows();
    Eigen::EigenSolver<Matrix> es(X, true);
    if (es.info() != Eigen::Success) throw NumericalError("spectral", "eigenvalue computation did not converge");
    const CVector ev = es.eigenvalues();
    const CMatrix V = es.eigenvectors();

    SpectralSplit out;
    out.matrix = X;
    out.threshold = 1.0 / std::sqrt(beta);

    const double max_mod = ev.cwiseAbs().maxCoeff();
    const double gap = tol.distinctness * max_mod;
    const auto cluster_id = clusters(ev, gap);
    out.distinct = max_mod > 0.0 || d == 1;
    for (Eigen::Index i = 0; i < d && out.distinct; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (std::abs(ev(i) - ev(j)) <= gap) {
                out.distinct = false;
                break;
            }
        }
    }

    // A repeated eigenvalue needs as many independent eigenvectors as copies.
    const double scale = std::max(1.0, X.norm());
    std::vector<bool> checked(static_cast<std::size_t>(d), false);
    for (Eigen::Index i = 0; i < d; ++i) {
        const int id = cluster_id[static_cast<std::size_t>(i)];
        if (checked[static_cast<std::size_t>(id)]) continue;
        checked[static_cast<std::size_t>(id)] = true;
        int algebraic = 0;
        Complex mean = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (cluster_id[static_cast<std::size_t>(j)] == id) {
                ++algebraic;
                mean += ev(j);
            }
        }
        if (algebraic < 2) continue;
        mean /= static_cast<double>(algebraic);
        CMatrix shifted = X.cast<Complex>();
        shifted.diagonal().array() -= mean;
        Eigen::JacobiSVD<CMatrix> svd(shifted);
        int rank = 0;
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
            rank += svd.singularValues()(k) > 1e-6 * scale ? 1 : 0;
        }
        const int geometric = static_cast<int>(d) - rank;
        if (geometric < algebraic) {
            out.diagonalizable = false;
            throw DefectiveMatrixError(mean, algebraic, geometric);
        }
    }

    Eigen::JacobiSVD<CMatrix> vsvd(V);
    const auto& vs = vsvd.singularValues();
    if (vs(vs.size() - 1) <= 1e-14 * vs(0)) {
        throw DefectiveMatrixError(ev(0), static_cast<int>(d), static_cast<int>(d) - 1);
    }
    const CMatrix left = V.inverse();

    const auto order = sort_order(ev);
    out.eigenvalues.resize(d);
    out.M.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const int src = order[static_cast<std::size_t>(i)];
        out.eigenvalues(i) = ev(src);
        out.M.row(i) = left.row(src);
    }

    for (Eigen::Index i = 0; i < d; ++i) {
        const double mod = std::abs(out.eigenvalues(i));
        if (mod < out.threshold - tol.stability_margin) {
            ++out.n_stable;
        } else if (mod < out.threshold + tol.stability_margin) {
            out.borderline.push_back(static_cast<int>(i));
        }
        if (mod < 1.0 - tol.stability_margin) ++out.n_unit_stable;
    }
    return out;
}

MirrorReport eigenvalue_mirror_check(const SpectralSplit& open_loop, const SpectralSplit& closed_loop,
                                     const Tolerances& tol) {
    if (open_loop.size() != closed_loop.size()) {
        throw UsageError("spectral", "eigenvalue_mirror_check: spectra have different sizes");
    }
    const double beta = open_loop.beta();
    const int d = open_loop.size();
    std::vector<bool> used(static_cast<std::size_t>(d), false);

    MirrorReport rep;
    for (int i = 0; i < d; ++i) {
        const Complex lam = open_loop.eigenvalues(i);
        const bool mirrored = !open_loop.is_stable(i);
        const double target = mirrored ? 1.0 / (beta * std::abs(lam)) : 0.0;
        int best = -1;
        double best_res = 0.0;
        for (int j = 0; j < d; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const Complex mu = closed_loop.eigenvalues(j);
            const double res = mirrored ? std::abs(std::abs(mu) - target) : std::abs(mu - lam);
            if (best < 0 || res < best_res) {
                best = j;
                best_res = res;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        rep.pairs.push_back({i, best, mirrored, best_res});
        rep.max_residual = std::max(rep.max_residual, best_res);
    }
    rep.pass = rep.max_residual < tol.mirror;
    return rep;
}

}  // namespace relq
