#include "tomlab/probing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace tomlab::probing {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Good to ~1e-12 on
// the covariance sizes used here (d <= a few hundred).
void jacobi_eigen(Matrix& A, Matrix& V, std::vector<double>& eigenvalues) {
    const std::size_t n = A.rows;
    V = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) V.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += A.at(i, j) * A.at(i, j);
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A.at(p, q);
                if (std::abs(apq) < 1e-18) continue;
                const double app = A.at(p, p), aqq = A.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = A.at(i, p), aiq = A.at(i, q);
                    A.at(i, p) = c * aip - s * aiq;
                    A.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = A.at(p, i), aqi = A.at(q, i);
                    A.at(p, i) = c * api - s * aqi;
                    A.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = V.at(i, p), viq = V.at(i, q);
                    V.at(i, p) = c * vip - s * viq;
                    V.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = A.at(i, i);
}

// Solves (A + alpha I) x = b for symmetric positive definite A via Cholesky.
std::vector<double> cholesky_solve(Matrix A, double alpha, const std::vector<double>& b) {
    const std::size_t n = A.rows;
    for (std::size_t i = 0; i < n; ++i) A.at(i, i) += alpha;
    // Decompose in place: A = L L^T.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = A.at(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= A.at(i, k) * A.at(j, k);
            if (i == j) {
                if (sum <= 1e-12)
                    throw SolverError("ridge system is singular (alpha too small)");
                A.at(i, i) = std::sqrt(sum);
            } else {
                A.at(i, j) = sum / A.at(j, j);
            }
        }
    }
    std::vector<double> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= A.at(i, k) * y[k];
        y[i] = sum / A.at(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= A.at(k, ii) * x[k];
        x[ii] = sum / A.at(ii, ii);
    }
    return x;
}

std::vector<double> column_means(const Matrix& X) {
    std::vector<double> mean(X.cols, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < X.cols; ++j) mean[j] += X.at(i, j);
    for (auto& m : mean) m /= static_cast<double>(X.rows);
    return mean;
}

struct Standardizer {
    std::vector<double> mean, scale;
};

Standardizer fit_standardizer(const Matrix& X) {
    Standardizer st;
    st.mean = column_means(X);
    st.scale.assign(X.cols, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < X.cols; ++j) {
            const double c = X.at(i, j) - st.mean[j];
            st.scale[j] += c * c;
        }
    for (auto& s : st.scale) {
        s = std::sqrt(s / static_cast<double>(X.rows));
        if (s <= 0.0) s = 1.0;  // constant feature
    }
    return st;
}

Matrix apply_standardizer(const Standardizer& st, const Matrix& X) {
    Matrix Z(X.rows, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < X.cols; ++j)
            Z.at(i, j) = (X.at(i, j) - st.mean[j]) / st.scale[j];
    return Z;
}

// Z [n,d] x basis^T [d,k] -> [n,k]; k = 0 passes Z through.
Matrix project(const Matrix& Z, const Matrix& basis) {
    if (basis.rows == 0) return Z;
    Matrix P(Z.rows, basis.rows);
    for (std::size_t i = 0; i < Z.rows; ++i)
        for (std::size_t k = 0; k < basis.rows; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < Z.cols; ++j) acc += Z.at(i, j) * basis.at(k, j);
            P.at(i, k) = acc;
        }
    return P;
}

double r_squared_local(const std::vector<double>& preds, const std::vector<double>& golds) {
    double mean = std::accumulate(golds.begin(), golds.end(), 0.0) /
                  static_cast<double>(golds.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        ss_res += (golds[i] - preds[i]) * (golds[i] - preds[i]);
        ss_tot += (golds[i] - mean) * (golds[i] - mean);
    }
    if (ss_tot == 0.0) throw DegeneracyError("r_squared: constant gold values");
    return 1.0 - ss_res / ss_tot;
}

}  // namespace

PcaResult fit_pca(const Matrix& X, int k) {
    if (X.rows < 2) throw SizeError("fit_pca: need at least 2 rows");
    const int max_k = static_cast<int>(std::min(X.rows, X.cols));
    if (k < 0 || k > max_k)
        throw RangeError("fit_pca: k=" + std::to_string(k) + " out of [0, " +
                         std::to_string(max_k) + "]");
    PcaResult out;
    if (k == 0) return out;  // identity convention

    const auto mean = column_means(X);
    Matrix cov(X.cols, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t a = 0; a < X.cols; ++a) {
            const double ca = X.at(i, a) - mean[a];
            for (std::size_t b2 = a; b2 < X.cols; ++b2)
                cov.at(a, b2) += ca * (X.at(i, b2) - mean[b2]);
        }
    for (std::size_t a = 0; a < X.cols; ++a)
        for (std::size_t b2 = 0; b2 < a; ++b2) cov.at(a, b2) = cov.at(b2, a);
    const double denom = static_cast<double>(X.rows - 1);
    for (auto& v : cov.data) v /= denom;

    Matrix V;
    std::vector<double> eig;
    jacobi_eigen(cov, V, eig);
    std::vector<std::size_t> order(eig.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });
    double total = 0.0;
    for (double e : eig) total += std::max(e, 0.0);
    if (total <= 0.0) total = 1.0;

    out.basis = Matrix(static_cast<std::size_t>(k), X.cols);
    out.explained_ratio.resize(static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r) {
        const auto col = order[static_cast<std::size_t>(r)];
        for (std::size_t j = 0; j < X.cols; ++j)
            out.basis.at(static_cast<std::size_t>(r), j) = V.at(j, col);
        out.explained_ratio[static_cast<std::size_t>(r)] = std::max(eig[col], 0.0) / total;
    }
    return out;
}

namespace {

// Multinomial logistic regression, full-batch gradient descent with Armijo
// backtracking. Objective: mean CE + 0.5/(C*n) * ||W||^2.
void fit_logistic(const Matrix& X, const std::vector<int>& y, int n_classes, double C,
                  std::uint64_t seed, int max_iters, double tol, Matrix& W,
                  std::vector<double>& b) {
    const std::size_t n = X.rows, k = X.cols;
    const auto nc = static_cast<std::size_t>(n_classes);
    W = Matrix(nc, k);
    b.assign(nc, 0.0);
    Rng rng(seed);
    for (auto& v : W.data) v = 0.01 * rng.normal();
    const double lambda = 1.0 / (C * static_cast<double>(n));

    auto objective = [&](const Matrix& Wc, const std::vector<double>& bc, Matrix* gW,
                         std::vector<double>* gb) {
        double loss = 0.0;
        if (gW) {
            *gW = Matrix(nc, k);
            gb->assign(nc, 0.0);
        }
        std::vector<double> logits(nc);
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -1e300;
            for (std::size_t c = 0; c < nc; ++c) {
                double acc = bc[c];
                for (std::size_t j = 0; j < k; ++j) acc += Wc.at(c, j) * X.at(i, j);
                logits[c] = acc;
                mx = std::max(mx, acc);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < nc; ++c) sum += std::exp(logits[c] - mx);
            const auto target = static_cast<std::size_t>(y[i]);
            loss += std::log(sum) + mx - logits[target];
            if (gW) {
                for (std::size_t c = 0; c < nc; ++c) {
                    const double p = std::exp(logits[c] - mx) / sum;
                    const double g = (p - (c == target ? 1.0 : 0.0)) / static_cast<double>(n);
                    (*gb)[c] += g;
                    for (std::size_t j = 0; j < k; ++j) gW->at(c, j) += g * X.at(i, j);
                }
            }
        }
        loss /= static_cast<double>(n);
        for (std::size_t idx = 0; idx < Wc.data.size(); ++idx) {
            loss += 0.5 * lambda * Wc.data[idx] * Wc.data[idx];
            if (gW) gW->data[idx] += lambda * Wc.data[idx];
        }
        return loss;
    };

    double step = 1.0;
    Matrix gW;
    std::vector<double> gb;
    double f0 = objective(W, b, &gW, &gb);
    for (int iter = 0; iter < max_iters; ++iter) {
        double gnorm = 0.0;
        for (double g : gW.data) gnorm = std::max(gnorm, std::abs(g));
        for (double g : gb) gnorm = std::max(gnorm, std::abs(g));
        if (gnorm < tol) break;
        double g2 = 0.0;
        for (double g : gW.data) g2 += g * g;
        for (double g : gb) g2 += g * g;

        step = std::min(step * 2.0, 64.0);
        Matrix Wn = W;
        std::vector<double> bn = b;
        double fn = 0.0;
        for (int back = 0; back < 40; ++back) {
            for (std::size_t i2 = 0; i2 < W.data.size(); ++i2)
                Wn.data[i2] = W.data[i2] - step * gW.data[i2];
            for (std::size_t c = 0; c < nc; ++c) bn[c] = b[c] - step * gb[c];
            fn = objective(Wn, bn, nullptr, nullptr);
            if (fn <= f0 - 1e-4 * step * g2) break;
            step *= 0.5;
        }
        W = Wn;
        b = bn;
        f0 = objective(W, b, &gW, &gb);
        (void)fn;
    }
}

}  // namespace

ProbeModel fit_classifier_probe(const Matrix& H_train, const std::vector<int>& y_train,
                                const Matrix& H_val, const std::vector<int>& y_val,
                                const ProbeGrid& grid, std::uint64_t seed) {
    if (H_train.rows != y_train.size() || H_val.rows != y_val.size())
        throw ShapeError("fit_classifier_probe: labels do not match rows");
    int n_classes = 0;
    for (int c : y_train) n_classes = std::max(n_classes, c + 1);
    {
        std::vector<int> seen(static_cast<std::size_t>(n_classes), 0);
        for (int c : y_train) seen[static_cast<std::size_t>(c)] = 1;
        int distinct = 0;
        for (int s : seen) distinct += s;
        if (distinct < 2)
            throw DegeneracyError("fit_classifier_probe: training labels have a single class");
    }

    const auto st = fit_standardizer(H_train);
    const Matrix Z_train = apply_standardizer(st, H_train);
    const Matrix Z_val = apply_standardizer(st, H_val);

    ProbeModel best;
    double best_acc = -1.0;
    for (int comps : grid.components) {
        if (comps > static_cast<int>(std::min(Z_train.rows, Z_train.cols))) {
            std::fprintf(stderr,
                         "[probe] skipping grid point n_components=%d (exceeds data rank)\n",
                         comps);
            continue;
        }
        auto pca = fit_pca(Z_train, comps);
        const Matrix P_train = project(Z_train, pca.basis);
        const Matrix P_val = project(Z_val, pca.basis);
        for (double C : grid.l2_c) {
            Matrix W;
            std::vector<double> b;
            fit_logistic(P_train, y_train, n_classes, C, seed, 5000, 1e-6, W, b);
            int correct = 0;
            for (std::size_t i = 0; i < P_val.rows; ++i) {
                int arg = 0;
                double bestv = -1e300;
                for (int c = 0; c < n_classes; ++c) {
                    double acc = b[static_cast<std::size_t>(c)];
                    for (std::size_t j = 0; j < P_val.cols; ++j)
                        acc += W.at(static_cast<std::size_t>(c), j) * P_val.at(i, j);
                    if (acc > bestv) {
                        bestv = acc;
                        arg = c;
                    }
                }
                correct += arg == y_val[i] ? 1 : 0;
            }
            const double acc = static_cast<double>(correct) /
                               static_cast<double>(std::max<std::size_t>(1, P_val.rows));
            if (acc > best_acc) {
                best_acc = acc;
                best.task = "classification";
                best.mean = st.mean;
                best.scale = st.scale;
                best.k = comps;
                best.basis = pca.basis;
                best.w = W;
                best.b = b;
                best.n_classes = n_classes;
                best.chosen = GridPoint{comps, C, 0.0};
            }
        }
    }
    if (best.task.empty()) throw RangeError("fit_classifier_probe: no usable grid point");
    return best;
}

ProbeModel fit_regressor_probe(const Matrix& H_train, const std::vector<double>& y_train,
                               const Matrix& H_val, const std::vector<double>& y_val,
                               const ProbeGrid& grid) {
    if (H_train.rows != y_train.size() || H_val.rows != y_val.size())
        throw ShapeError("fit_regressor_probe: labels do not match rows");
    if (H_train.rows < 2) throw SizeError("fit_regressor_probe: need at least 2 rows");

    const auto st = fit_standardizer(H_train);
    const Matrix Z_train = apply_standardizer(st, H_train);
    const Matrix Z_val = apply_standardizer(st, H_val);

    ProbeModel best;
    double best_r2 = -1e300;
    for (int comps : grid.components) {
        if (comps > static_cast<int>(std::min(Z_train.rows, Z_train.cols))) {
            std::fprintf(stderr,
                         "[probe] skipping grid point n_components=%d (exceeds data rank)\n",
                         comps);
            continue;
        }
        auto pca = fit_pca(Z_train, comps);
        const Matrix P_train = project(Z_train, pca.basis);
        const Matrix P_val = project(Z_val, pca.basis);
        const std::size_t k = P_train.cols;

        // Center features and targets; solve (X^T X + alpha I) w = X^T y.
        const auto fmean = column_means(P_train);
        double ymean = std::accumulate(y_train.begin(), y_train.end(), 0.0) /
                       static_cast<double>(y_train.size());
        Matrix xtx(k, k);
        std::vector<double> xty(k, 0.0);
        for (std::size_t i = 0; i < P_train.rows; ++i) {
            for (std::size_t a = 0; a < k; ++a) {
                const double xa = P_train.at(i, a) - fmean[a];
                xty[a] += xa * (y_train[i] - ymean);
                for (std::size_t b2 = a; b2 < k; ++b2)
                    xtx.at(a, b2) += xa * (P_train.at(i, b2) - fmean[b2]);
            }
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b2 = 0; b2 < a; ++b2) xtx.at(a, b2) = xtx.at(b2, a);

        for (double alpha : grid.ridge_alpha) {
            auto wv = cholesky_solve(xtx, alpha, xty);
            double intercept = ymean;
            for (std::size_t a = 0; a < k; ++a) intercept -= wv[a] * fmean[a];
            std::vector<double> preds(P_val.rows, 0.0);
            for (std::size_t i = 0; i < P_val.rows; ++i) {
                double acc = intercept;
                for (std::size_t a = 0; a < k; ++a) acc += wv[a] * P_val.at(i, a);
                preds[i] = acc;
            }
            const double r2 = r_squared_local(preds, y_val);
            if (r2 > best_r2) {
                best_r2 = r2;
                best.task = "regression";
                best.mean = st.mean;
                best.scale = st.scale;
                best.k = comps;
                best.basis = pca.basis;
                best.w = Matrix(1, k);
                for (std::size_t a = 0; a < k; ++a) best.w.at(0, a) = wv[a];
                best.b = {intercept};
                best.n_classes = 0;
                best.chosen = GridPoint{comps, 0.0, alpha};
            }
        }
    }
    if (best.task.empty()) throw RangeError("fit_regressor_probe: no usable grid point");
    return best;
}

namespace {

std::vector<double> transform_input(const ProbeModel& p, const std::vector<double>& h) {
    if (h.size() != p.mean.size()) throw ShapeError("probe_predict: input width mismatch");
    std::vector<double> z(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) z[j] = (h[j] - p.mean[j]) / p.scale[j];
    if (p.k == 0) return z;
    std::vector<double> out(static_cast<std::size_t>(p.k), 0.0);
    for (std::size_t r = 0; r < out.size(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) acc += p.basis.at(r, j) * z[j];
        out[r] = acc;
    }
    return out;
}

}  // namespace

std::vector<double> probe_predict_dist(const ProbeModel& p, const std::vector<double>& h) {
    for (double v : h)
        if (!std::isfinite(v)) throw ContractError("probe_predict: non-finite input");
    if (p.task != "classification") throw ContractError("probe_predict_dist: not a classifier");
    const auto z = transform_input(p, h);
    std::vector<double> logits(static_cast<std::size_t>(p.n_classes));
    double mx = -1e300;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        double acc = p.b[c];
        for (std::size_t j = 0; j < z.size(); ++j) acc += p.w.at(c, j) * z[j];
        logits[c] = acc;
        mx = std::max(mx, acc);
    }
    double sum = 0.0;
    for (auto& l : logits) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (auto& l : logits) l /= sum;
    return logits;
}

int probe_predict_class(const ProbeModel& p, const std::vector<double>& h) {
    const auto dist = probe_predict_dist(p, h);
    return static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

double probe_predict_value(const ProbeModel& p, const std::vector<double>& h) {
    for (double v : h)
        if (!std::isfinite(v)) throw ContractError("probe_predict: non-finite input");
    if (p.task != "regression") throw ContractError("probe_predict_value: not a regressor");
    const auto z = transform_input(p, h);
    double acc = p.b[0];
    for (std::size_t j = 0; j < z.size(); ++j) acc += p.w.at(0, j) * z[j];
    return acc;
}

PairClassReport evaluate_probe_pair(const ProbeModel& p1, const ProbeModel& p2, const Matrix& H,
                                    const std::vector<int>& y1, const std::vector<int>& y2) {
    if (H.rows != y1.size() || H.rows != y2.size())
        throw ShapeError("evaluate_probe_pair: label count mismatch");
    PairClassReport rep;
    rep.n = static_cast<int>(H.rows);
    int c1 = 0, c2 = 0, cboth = 0;
    for (std::size_t i = 0; i < H.rows; ++i) {
        std::vector<double> h(H.data.begin() + static_cast<std::ptrdiff_t>(i * H.cols),
                              H.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * H.cols));
        const bool ok1 = probe_predict_class(p1, h) == y1[i];
        const bool ok2 = probe_predict_class(p2, h) == y2[i];
        c1 += ok1 ? 1 : 0;
        c2 += ok2 ? 1 : 0;
        cboth += (ok1 && ok2) ? 1 : 0;
    }
    const double denom = std::max(1, rep.n);
    rep.agent1 = 100.0 * c1 / denom;
    rep.agent2 = 100.0 * c2 / denom;
    rep.both = 100.0 * cboth / denom;
    return rep;
}

PairRegReport evaluate_probe_pair(const ProbeModel& seller, const ProbeModel& buyer,
                                  const Matrix& H, const std::vector<double>& y_seller,
                                  const std::vector<double>& y_buyer) {
    if (H.rows != y_seller.size() || H.rows != y_buyer.size())
        throw ShapeError("evaluate_probe_pair: label count mismatch");
    PairRegReport rep;
    rep.n = static_cast<int>(H.rows);
    std::vector<double> ps(H.rows), pb(H.rows);
    for (std::size_t i = 0; i < H.rows; ++i) {
        std::vector<double> h(H.data.begin() + static_cast<std::ptrdiff_t>(i * H.cols),
                              H.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * H.cols));
        ps[i] = probe_predict_value(seller, h);
        pb[i] = probe_predict_value(buyer, h);
    }
    rep.seller_r2 = r_squared_local(ps, y_seller);
    rep.buyer_r2 = r_squared_local(pb, y_buyer);
    return rep;
}

// Probe files use the same manifest + flat-array convention as checkpoints,
// with float64 payloads and the chosen grid point recorded in the manifest.
void save_probe(const ProbeModel& p, const std::string& path) {
    fs::create_directories(path);
    json tensors = json::array();
    std::vector<std::pair<std::string, const std::vector<double>*>> arrays;
    Matrix wcopy = p.w;
    std::vector<double> bcopy = p.b;
    arrays.emplace_back("mean", &p.mean);
    arrays.emplace_back("scale", &p.scale);
    arrays.emplace_back("basis", &p.basis.data);
    arrays.emplace_back("w", &wcopy.data);
    arrays.emplace_back("b", &bcopy);
    std::int64_t offset = 0;
    auto shape_of = [&](const std::string& name) -> std::vector<std::int64_t> {
        if (name == "mean" || name == "scale")
            return {static_cast<std::int64_t>(p.mean.size())};
        if (name == "basis")
            return {static_cast<std::int64_t>(p.basis.rows), static_cast<std::int64_t>(p.basis.cols)};
        if (name == "w")
            return {static_cast<std::int64_t>(p.w.rows), static_cast<std::int64_t>(p.w.cols)};
        return {static_cast<std::int64_t>(p.b.size())};
    };
    for (const auto& [name, arr] : arrays) {
        tensors.push_back(json{{"name", name},
                               {"shape", shape_of(name)},
                               {"dtype", "f64"},
                               {"byte_offset", offset}});
        offset += static_cast<std::int64_t>(arr->size() * sizeof(double));
    }
    json manifest{{"kind", "probe"},
                  {"task", p.task},
                  {"k", p.k},
                  {"n_classes", p.n_classes},
                  {"chosen", json{{"components", p.chosen.components},
                                  {"l2_c", p.chosen.l2_c},
                                  {"ridge_alpha", p.chosen.ridge_alpha}}},
                  {"tensors", tensors}};
    std::ofstream mf(fs::path(path) / "manifest.json");
    mf << manifest.dump(2) << "\n";
    std::ofstream bin(fs::path(path) / "params.bin", std::ios::binary);
    for (const auto& [name, arr] : arrays)
        bin.write(reinterpret_cast<const char*>(arr->data()),
                  static_cast<std::streamsize>(arr->size() * sizeof(double)));
    if (!bin) throw FormatError("probe write failed: " + path);
}

ProbeModel load_probe(const std::string& path) {
    std::ifstream mf(fs::path(path) / "manifest.json");
    if (!mf) throw FormatError("missing probe manifest: " + path);
    json manifest;
    mf >> manifest;
    ProbeModel p;
    p.task = manifest.at("task").get<std::string>();
    p.k = manifest.at("k").get<int>();
    p.n_classes = manifest.at("n_classes").get<int>();
    p.chosen.components = manifest.at("chosen").at("components").get<int>();
    p.chosen.l2_c = manifest.at("chosen").at("l2_c").get<double>();
    p.chosen.ridge_alpha = manifest.at("chosen").at("ridge_alpha").get<double>();

    std::ifstream bin(fs::path(path) / "params.bin", std::ios::binary);
    if (!bin) throw FormatError("missing probe arrays: " + path);
    auto read_array = [&](const json& entry) {
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        std::int64_t n = 1;
        for (auto s : shape) n *= s;
        std::vector<double> data(static_cast<std::size_t>(n));
        bin.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!bin) throw FormatError("probe arrays truncated: " + path);
        return std::make_pair(shape, data);
    };
    for (const auto& entry : manifest.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        auto [shape, data] = read_array(entry);
        if (name == "mean") p.mean = data;
        else if (name == "scale") p.scale = data;
        else if (name == "basis") {
            p.basis = Matrix(static_cast<std::size_t>(shape.size() == 2 ? shape[0] : 0),
                             static_cast<std::size_t>(shape.size() == 2 ? shape[1] : 0));
            p.basis.data = data;
        } else if (name == "w") {
            p.w = Matrix(static_cast<std::size_t>(shape[0]), static_cast<std::size_t>(shape[1]));
            p.w.data = data;
        } else if (name == "b") {
            p.b = data;
        }
    }
    return p;
}

}  // namespace tomlab::probing
