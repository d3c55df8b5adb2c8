#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tomlab/probing.hpp"

using namespace tomlab;
using namespace tomlab::probing;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = scale * rng.normal();
    return m;
}

std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "tomlab_tests" / name;
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("fit_pca: collinear data explained by one component") {
    Rng rng(1);
    Matrix X(60, 2);
    for (std::size_t i = 0; i < 60; ++i) {
        const double x = rng.normal();
        X.at(i, 0) = x;
        X.at(i, 1) = 2.0 * x;
    }
    auto pca = fit_pca(X, 1);
    REQUIRE(pca.basis.rows == 1);
    CHECK(pca.explained_ratio[0] >= 0.999);
    // Direction proportional to (1, 2) normalized.
    const double ratio = pca.basis.at(0, 1) / pca.basis.at(0, 0);
    CHECK(ratio == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("fit_pca: k = 0 is the identity convention") {
    Rng rng(2);
    auto X = random_matrix(rng, 10, 4);
    auto pca = fit_pca(X, 0);
    CHECK(pca.basis.rows == 0);
    CHECK(pca.explained_ratio.empty());
}

TEST_CASE("fit_pca: full-rank reconstruction and orthonormal rows") {
    Rng rng(3);
    auto X = random_matrix(rng, 20, 5);
    auto pca = fit_pca(X, 5);
    // Ratios non-increasing.
    for (std::size_t i = 1; i < pca.explained_ratio.size(); ++i)
        CHECK(pca.explained_ratio[i] <= pca.explained_ratio[i - 1] + 1e-12);
    // Rows orthonormal within 1e-5.
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b) {
            double dot = 0;
            for (std::size_t j = 0; j < 5; ++j) dot += pca.basis.at(a, j) * pca.basis.at(b, j);
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-5);
        }
    // Reconstruction error at full rank < 1e-8.
    std::vector<double> mean(5, 0.0);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 5; ++j) mean[j] += X.at(i, j) / 20.0;
    double worst = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        std::vector<double> centered(5), proj(5, 0.0), recon(5, 0.0);
        for (std::size_t j = 0; j < 5; ++j) centered[j] = X.at(i, j) - mean[j];
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t j = 0; j < 5; ++j) proj[r] += pca.basis.at(r, j) * centered[j];
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t r = 0; r < 5; ++r) recon[j] += pca.basis.at(r, j) * proj[r];
        for (std::size_t j = 0; j < 5; ++j) worst = std::max(worst, std::abs(recon[j] - centered[j]));
    }
    CHECK(worst < 1e-8);

    CHECK_THROWS_AS(fit_pca(X, 6), RangeError);
}

TEST_CASE("classifier probe separates linear blobs") {
    Rng rng(4);
    const std::size_t n = 120, d = 6;
    Matrix Htr(n, d), Hval(60, d);
    std::vector<int> ytr(n), yval(60);
    auto fill = [&](Matrix& H, std::vector<int>& y, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const int cls = static_cast<int>(i % 2);
            y[i] = cls;
            for (std::size_t j = 0; j < d; ++j)
                H.at(i, j) = rng.normal() + (cls == 0 ? 4.0 : -4.0);
        }
    };
    fill(Htr, ytr, n);
    fill(Hval, yval, 60);
    ProbeGrid grid;
    grid.components = {0, 2};
    auto probe = fit_classifier_probe(Htr, ytr, Hval, yval, grid, 29);
    int correct = 0;
    for (std::size_t i = 0; i < 60; ++i) {
        std::vector<double> h(d);
        for (std::size_t j = 0; j < d; ++j) h[j] = Hval.at(i, j);
        correct += probe_predict_class(probe, h) == yval[i] ? 1 : 0;
    }
    CHECK(correct == 60);

    // Same seed, same data -> same grid point.
    auto probe2 = fit_classifier_probe(Htr, ytr, Hval, yval, grid, 29);
    CHECK(probe.chosen.components == probe2.chosen.components);
    CHECK(probe.chosen.l2_c == probe2.chosen.l2_c);
}

TEST_CASE("classifier probe on shuffled labels stays in the chance band") {
    Rng rng(5);
    const std::size_t d = 8;
    Matrix Htr(150, d), Hval(150, d);
    std::vector<int> ytr(150), yval(150);
    for (std::size_t i = 0; i < 150; ++i) {
        ytr[i] = static_cast<int>(rng.uniform_int(0, 2));
        yval[i] = static_cast<int>(rng.uniform_int(0, 2));
        for (std::size_t j = 0; j < d; ++j) {
            Htr.at(i, j) = rng.normal();
            Hval.at(i, j) = rng.normal();
        }
    }
    ProbeGrid grid;
    grid.components = {0};
    grid.l2_c = {1.0};
    auto probe = fit_classifier_probe(Htr, ytr, Hval, yval, grid, 29);
    int correct = 0;
    for (std::size_t i = 0; i < 150; ++i) {
        std::vector<double> h(d);
        for (std::size_t j = 0; j < d; ++j) h[j] = Hval.at(i, j);
        correct += probe_predict_class(probe, h) == yval[i] ? 1 : 0;
    }
    const double acc = correct / 150.0;
    CHECK(acc >= 0.2);
    CHECK(acc <= 0.47);
}

TEST_CASE("classifier probe rejects single-class labels") {
    Rng rng(6);
    auto H = random_matrix(rng, 20, 4);
    std::vector<int> y(20, 0);
    ProbeGrid grid;
    CHECK_THROWS_AS(fit_classifier_probe(H, y, H, y, grid, 29), DegeneracyError);
}

TEST_CASE("regressor probe fits exact linear targets") {
    Rng rng(7);
    const std::size_t d = 5;
    Matrix Htr(80, d), Hval(40, d);
    std::vector<double> ytr(80), yval(40);
    const std::vector<double> w = {1.5, -2.0, 0.5, 3.0, -1.0};
    auto fill = [&](Matrix& H, std::vector<double>& y, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            double acc = 0.7;
            for (std::size_t j = 0; j < d; ++j) {
                H.at(i, j) = rng.normal();
                acc += w[j] * H.at(i, j);
            }
            y[i] = acc;
        }
    };
    fill(Htr, ytr, 80);
    fill(Hval, yval, 40);
    ProbeGrid grid;
    grid.components = {0, 3};
    grid.ridge_alpha = {1e-6};
    auto probe = fit_regressor_probe(Htr, ytr, Hval, yval, grid);
    std::vector<double> preds(40);
    double ss_res = 0, ss_tot = 0, mean = 0;
    for (double v : yval) mean += v / 40.0;
    for (std::size_t i = 0; i < 40; ++i) {
        std::vector<double> h(d);
        for (std::size_t j = 0; j < d; ++j) h[j] = Hval.at(i, j);
        preds[i] = probe_predict_value(probe, h);
        ss_res += (preds[i] - yval[i]) * (preds[i] - yval[i]);
        ss_tot += (yval[i] - mean) * (yval[i] - mean);
    }
    CHECK(1.0 - ss_res / ss_tot > 0.999);
}

TEST_CASE("regressor probe on independent noise has low validation R2") {
    Rng rng(8);
    const std::size_t d = 6;
    Matrix Htr(100, d), Hval(100, d);
    std::vector<double> ytr(100), yval(100);
    for (std::size_t i = 0; i < 100; ++i) {
        ytr[i] = rng.normal();
        yval[i] = rng.normal();
        for (std::size_t j = 0; j < d; ++j) {
            Htr.at(i, j) = rng.normal();
            Hval.at(i, j) = rng.normal();
        }
    }
    ProbeGrid grid;
    grid.components = {0};
    auto probe = fit_regressor_probe(Htr, ytr, Hval, yval, grid);
    std::vector<double> preds(100);
    double ss_res = 0, ss_tot = 0, mean = 0;
    for (double v : yval) mean += v / 100.0;
    for (std::size_t i = 0; i < 100; ++i) {
        std::vector<double> h(d);
        for (std::size_t j = 0; j < d; ++j) h[j] = Hval.at(i, j);
        preds[i] = probe_predict_value(probe, h);
        ss_res += (preds[i] - yval[i]) * (preds[i] - yval[i]);
        ss_tot += (yval[i] - mean) * (yval[i] - mean);
    }
    CHECK(1.0 - ss_res / ss_tot <= 0.1);
}

TEST_CASE("regressor grid skips components beyond width; zero ridge on singular data fails") {
    Rng rng(9);
    const std::size_t d = 4;
    Matrix Htr(30, d), Hval(10, d);
    std::vector<double> ytr(30), yval(10);
    for (std::size_t i = 0; i < 30; ++i) {
        const double x = rng.normal();
        // Duplicate columns make X^T X singular.
        Htr.at(i, 0) = x;
        Htr.at(i, 1) = x;
        Htr.at(i, 2) = rng.normal();
        Htr.at(i, 3) = Htr.at(i, 2);
        ytr[i] = x;
    }
    for (std::size_t i = 0; i < 10; ++i) {
        yval[i] = rng.normal();
        for (std::size_t j = 0; j < d; ++j) Hval.at(i, j) = rng.normal();
    }
    ProbeGrid skip_grid;
    skip_grid.components = {0, 100};  // 100 > d, must be skipped with a warning
    skip_grid.ridge_alpha = {1.0};
    CHECK_NOTHROW(fit_regressor_probe(Htr, ytr, Hval, yval, skip_grid));

    ProbeGrid zero_ridge;
    zero_ridge.components = {0};
    zero_ridge.ridge_alpha = {0.0};
    CHECK_THROWS_AS(fit_regressor_probe(Htr, ytr, Hval, yval, zero_ridge), SolverError);
}

TEST_CASE("probe_predict distribution examples") {
    ProbeModel p;
    p.task = "classification";
    p.n_classes = 3;
    p.mean.assign(4, 0.0);
    p.scale.assign(4, 1.0);
    p.k = 0;
    p.w = Matrix(3, 4);
    p.b = {0.0, 0.0, 0.0};
    auto dist = probe_predict_dist(p, {1.0, 2.0, 3.0, 4.0});
    for (double v : dist) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    p.b = {10.0, 0.0, 0.0};
    CHECK(probe_predict_class(p, {0.5, 0.5, 0.5, 0.5}) == 0);

    // Random probe matches an independent matrix-arithmetic oracle.
    Rng rng(10);
    ProbeModel q;
    q.task = "classification";
    q.n_classes = 3;
    q.mean = {0.3, -0.2, 0.5, 0.1};
    q.scale = {1.2, 0.8, 1.5, 2.0};
    q.k = 2;
    q.basis = Matrix(2, 4);
    for (auto& v : q.basis.data) v = rng.normal();
    q.w = Matrix(3, 2);
    for (auto& v : q.w.data) v = rng.normal();
    q.b = {0.1, -0.4, 0.2};
    const std::vector<double> h = {0.7, -1.1, 0.2, 0.9};
    auto got = probe_predict_dist(q, h);
    // Oracle: softmax(W * (basis * ((h - mean) / scale)) + b) by hand.
    std::vector<double> z(4);
    for (int j = 0; j < 4; ++j)
        z[static_cast<std::size_t>(j)] =
            (h[static_cast<std::size_t>(j)] - q.mean[static_cast<std::size_t>(j)]) /
            q.scale[static_cast<std::size_t>(j)];
    std::vector<double> proj(2, 0.0);
    for (int r = 0; r < 2; ++r)
        for (int j = 0; j < 4; ++j)
            proj[static_cast<std::size_t>(r)] +=
                q.basis.at(static_cast<std::size_t>(r), static_cast<std::size_t>(j)) *
                z[static_cast<std::size_t>(j)];
    std::vector<double> logits(3);
    double mx = -1e300;
    for (int c = 0; c < 3; ++c) {
        logits[static_cast<std::size_t>(c)] = q.b[static_cast<std::size_t>(c)];
        for (int r = 0; r < 2; ++r)
            logits[static_cast<std::size_t>(c)] +=
                q.w.at(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) *
                proj[static_cast<std::size_t>(r)];
        mx = std::max(mx, logits[static_cast<std::size_t>(c)]);
    }
    double sum = 0;
    for (double& l : logits) { l = std::exp(l - mx); sum += l; }
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        CHECK(got[static_cast<std::size_t>(c)] ==
              doctest::Approx(logits[static_cast<std::size_t>(c)] / sum).epsilon(1e-6));
        total += got[static_cast<std::size_t>(c)];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("evaluate_probe_pair classification scores") {
    // Build two trivial probes whose predictions we control via inputs.
    auto mk_probe = [] {
        ProbeModel p;
        p.task = "classification";
        p.n_classes = 2;
        p.mean.assign(2, 0.0);
        p.scale.assign(2, 1.0);
        p.k = 0;
        p.w = Matrix(2, 2);
        p.w.at(0, 0) = 1.0;   // class 0 follows feature 0
        p.w.at(1, 0) = -1.0;
        p.b = {0.0, 0.0};
        return p;
    };
    auto mk_probe2 = [] {
        ProbeModel p;
        p.task = "classification";
        p.n_classes = 2;
        p.mean.assign(2, 0.0);
        p.scale.assign(2, 1.0);
        p.k = 0;
        p.w = Matrix(2, 2);
        p.w.at(0, 1) = 1.0;   // class 0 follows feature 1
        p.w.at(1, 1) = -1.0;
        p.b = {0.0, 0.0};
        return p;
    };
    // Four samples with per-agent correctness TT, TF, FF, TT; hand count
    // gives Both 50, Agent1 75, Agent2 50.
    Matrix H(4, 2);
    std::vector<int> y1 = {0, 0, 1, 1};
    std::vector<int> y2 = {0, 1, 1, 0};
    H.at(0, 0) = 1.0;  H.at(0, 1) = 1.0;   // p1->0 ok, p2->0 ok
    H.at(1, 0) = 1.0;  H.at(1, 1) = 1.0;   // p1->0 ok, p2->0 wrong (gold 1)
    H.at(2, 0) = 1.0;  H.at(2, 1) = 1.0;   // p1->0 wrong (gold 1), p2->0 wrong (gold 1)
    H.at(3, 0) = -1.0; H.at(3, 1) = 1.0;   // p1->1 ok, p2->0 ok
    auto rep = evaluate_probe_pair(mk_probe(), mk_probe2(), H, y1, y2);
    CHECK(rep.agent1 == doctest::Approx(75.0));
    CHECK(rep.agent2 == doctest::Approx(50.0));
    CHECK(rep.both == doctest::Approx(50.0));
    CHECK(rep.both <= std::min(rep.agent1, rep.agent2));
}

TEST_CASE("probe save/load round-trip") {
    Rng rng(11);
    ProbeModel p;
    p.task = "classification";
    p.n_classes = 3;
    p.mean = {0.1, 0.2};
    p.scale = {1.0, 2.0};
    p.k = 2;
    p.basis = Matrix(2, 2);
    for (auto& v : p.basis.data) v = rng.normal();
    p.w = Matrix(3, 2);
    for (auto& v : p.w.data) v = rng.normal();
    p.b = {0.5, -0.5, 0.0};
    p.chosen = GridPoint{2, 10.0, 0.0};
    const auto dir = temp_dir("probe_rt");
    save_probe(p, dir);
    auto q = load_probe(dir);
    CHECK(q.task == p.task);
    CHECK(q.k == 2);
    CHECK(q.n_classes == 3);
    CHECK(q.chosen.components == 2);
    CHECK(q.chosen.l2_c == 10.0);
    CHECK(q.mean == p.mean);
    CHECK(q.basis.data == p.basis.data);
    CHECK(q.w.data == p.w.data);
    CHECK(q.b == p.b);
    const std::vector<double> h = {0.3, -0.7};
    CHECK(probe_predict_dist(p, h) == probe_predict_dist(q, h));
}
