#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomlab/common.hpp"

namespace tomlab::probing {

// Row-major double matrix used for all probe numerics.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct PcaResult {
    Matrix basis;                          // k x d, rows orthonormal
    std::vector<double> explained_ratio;   // non-increasing, length k
};

// Top-k principal directions of the centered rows of X. k = 0 means identity
// (skip PCA).
PcaResult fit_pca(const Matrix& X, int k);

struct GridPoint {
    int components = 0;    // 0 = skip PCA
    double l2_c = 1.0;     // inverse L2 strength for the classifier
    double ridge_alpha = 1.0;
};

struct ProbeGrid {
    std::vector<int> components = {0, 100, 200, 300, 400};
    std::vector<double> l2_c = {0.1, 1.0, 10.0};
    std::vector<double> ridge_alpha = {1.0};
};

struct ProbeModel {
    std::string task;                  // "classification" | "regression"
    std::vector<double> mean, scale;   // standardization over training rows
    int k = 0;                         // PCA components used (0 = identity)
    Matrix basis;                      // k x d
    Matrix w;                          // classes x k (or 1 x k for regression)
    std::vector<double> b;             // classes (or 1)
    int n_classes = 0;
    GridPoint chosen;
};

// Standardize -> PCA -> multinomial logistic regression trained by full-batch
// gradient descent with backtracking line search; the grid point is selected
// by validation exact match.
ProbeModel fit_classifier_probe(const Matrix& H_train, const std::vector<int>& y_train,
                                const Matrix& H_val, const std::vector<int>& y_val,
                                const ProbeGrid& grid, std::uint64_t seed);

// Standardize -> PCA -> ridge regression in closed form; the grid point is
// selected by validation R^2.
ProbeModel fit_regressor_probe(const Matrix& H_train, const std::vector<double>& y_train,
                               const Matrix& H_val, const std::vector<double>& y_val,
                               const ProbeGrid& grid);

std::vector<double> probe_predict_dist(const ProbeModel& p, const std::vector<double>& h);
int probe_predict_class(const ProbeModel& p, const std::vector<double>& h);
double probe_predict_value(const ProbeModel& p, const std::vector<double>& h);

struct PairClassReport {
    double both = 0.0;    // percentages
    double agent1 = 0.0;
    double agent2 = 0.0;
    int n = 0;
};

// Exact-match accuracy per agent plus the joint "Both" score.
PairClassReport evaluate_probe_pair(const ProbeModel& p1, const ProbeModel& p2, const Matrix& H,
                                    const std::vector<int>& y1, const std::vector<int>& y2);

struct PairRegReport {
    double seller_r2 = 0.0;
    double buyer_r2 = 0.0;
    int n = 0;
};

PairRegReport evaluate_probe_pair(const ProbeModel& seller, const ProbeModel& buyer,
                                  const Matrix& H, const std::vector<double>& y_seller,
                                  const std::vector<double>& y_buyer);

void save_probe(const ProbeModel& p, const std::string& path);
ProbeModel load_probe(const std::string& path);

}  // namespace tomlab::probing
