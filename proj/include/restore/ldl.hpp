#pragma once

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <vector>

namespace restore {

/// LDL^T factorization of a symmetric quasi-definite matrix, without pivoting.
/// Quasi-definite systems (positive-definite upper-left block, negative-definite
/// lower-right block after static regularization) admit such a factorization for
/// any symmetric permutation, so a fill-reducing ordering can be fixed up front.
///
/// The sparsity pattern is analyzed once; subsequent factorizations with the
/// same pattern reuse the symbolic data. A dense code path is used for small
/// systems or as a fallback if the sparse factorization breaks down.
class QdLdl {
public:
    /// Analyze the pattern of K (full symmetric matrix, both triangles).
    /// Chooses AMD ordering and builds the elimination structure.
    void analyze(const Eigen::SparseMatrix<double>& K);

    /// Numeric factorization. `sign[i]` = +1 for rows regularized upward,
    /// -1 for rows regularized downward; `reg` is the static regularization.
    /// Returns false if a pivot collapses (|d| below 1e-13) even after
    /// regularization.
    bool factorize(const Eigen::SparseMatrix<double>& K,
                   const std::vector<int>& sign, double reg);

    /// Solve K x = b in place using the current factors.
    void solve(Eigen::VectorXd& b) const;

    int dim() const { return n_; }
    bool analyzed() const { return analyzed_; }

private:
    void factorize_dense(const Eigen::MatrixXd& K);

    int n_ = 0;
    bool analyzed_ = false;
    bool use_dense_ = false;

    // Permutation (AMD) and its inverse.
    std::vector<int> perm_, iperm_;

    // Upper triangle of the permuted matrix in CSC.
    std::vector<int> up_col_ptr_, up_row_ind_;
    std::vector<double> up_val_;

    // Elimination tree and symbolic L structure (CSC, strictly lower).
    std::vector<int> etree_, l_col_ptr_, l_nnz_;
    std::vector<int> scatter_map_;
    std::vector<int> l_row_ind_;
    std::vector<double> l_val_, d_, dinv_;

    // Dense fallback storage.
    Eigen::MatrixXd dense_l_;
    Eigen::VectorXd dense_d_;

    // Workspaces.
    mutable std::vector<double> work_x_;
    std::vector<int> work_mark_, work_stack_;
};

} // namespace restore
