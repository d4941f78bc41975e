#include "restore/ldl.hpp"

#include <cmath>

namespace restore {

namespace {
constexpr double kPivotFloor = 1e-13;
constexpr int kDenseLimit = 500;
} // namespace

void QdLdl::analyze(const Eigen::SparseMatrix<double>& K) {
    n_ = static_cast<int>(K.rows());
    use_dense_ = n_ <= 64; // symbolic setup not worth it for tiny systems
    if (use_dense_) {
        analyzed_ = true;
        return;
    }

    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
    Eigen::SparseMatrix<double> Ksym = K;
    amd(Ksym.selfadjointView<Eigen::Upper>(), p);
    perm_.resize(n_);
    iperm_.resize(n_);
    for (int i = 0; i < n_; ++i) perm_[i] = p.indices()[i];
    for (int i = 0; i < n_; ++i) iperm_[perm_[i]] = i;

    // Upper triangle of the permuted matrix.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(K.nonZeros());
    for (int j = 0; j < K.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, j); it; ++it) {
            int pi = iperm_[it.row()], pj = iperm_[it.col()];
            if (pi <= pj) trips.emplace_back(pi, pj, it.value());
        }
    }
    Eigen::SparseMatrix<double> Up(n_, n_);
    Up.setFromTriplets(trips.begin(), trips.end());
    Up.makeCompressed();
    up_col_ptr_.assign(Up.outerIndexPtr(), Up.outerIndexPtr() + n_ + 1);
    up_row_ind_.assign(Up.innerIndexPtr(), Up.innerIndexPtr() + Up.nonZeros());
    up_val_.resize(Up.nonZeros());

    // Map every entry of K (in traversal order) to its slot in the permuted
    // upper triangle, so later factorizations skip the position search.
    scatter_map_.clear();
    scatter_map_.reserve(K.nonZeros());
    for (int j = 0; j < K.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, j); it; ++it) {
            int pi = iperm_[it.row()], pj = iperm_[it.col()];
            if (pi > pj) {
                scatter_map_.push_back(-1);
                continue;
            }
            int lo = up_col_ptr_[pj], hi = up_col_ptr_[pj + 1];
            while (lo < hi) {
                int mid = (lo + hi) / 2;
                if (up_row_ind_[mid] < pi)
                    lo = mid + 1;
                else
                    hi = mid;
            }
            scatter_map_.push_back(lo);
        }
    }

    // Elimination tree (Liu's algorithm on the upper-triangular pattern).
    etree_.assign(n_, -1);
    std::vector<int> ancestor(n_, -1);
    for (int j = 0; j < n_; ++j) {
        for (int ptr = up_col_ptr_[j]; ptr < up_col_ptr_[j + 1]; ++ptr) {
            int i = up_row_ind_[ptr];
            while (i != -1 && i < j) {
                int next = ancestor[i];
                ancestor[i] = j;
                if (next == -1) etree_[i] = j;
                i = next;
            }
        }
    }

    // Column counts of L: row j of L touches every pattern node on the
    // etree paths from the entries of column j up to j.
    l_nnz_.assign(n_, 0);
    work_mark_.assign(n_, -1);
    for (int j = 0; j < n_; ++j) {
        work_mark_[j] = j;
        for (int ptr = up_col_ptr_[j]; ptr < up_col_ptr_[j + 1]; ++ptr) {
            int i = up_row_ind_[ptr];
            if (i == j) continue;
            for (int k = i; work_mark_[k] != j; k = etree_[k]) {
                ++l_nnz_[k];
                work_mark_[k] = j;
            }
        }
    }
    l_col_ptr_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) l_col_ptr_[j + 1] = l_col_ptr_[j] + l_nnz_[j];
    l_row_ind_.assign(l_col_ptr_[n_], 0);
    l_val_.assign(l_col_ptr_[n_], 0.0);
    d_.assign(n_, 0.0);
    dinv_.assign(n_, 0.0);
    work_x_.assign(n_, 0.0);
    work_stack_.assign(n_, 0);
    work_mark_.assign(n_, -1);
    analyzed_ = true;
}

bool QdLdl::factorize(const Eigen::SparseMatrix<double>& K,
                      const std::vector<int>& sign, double reg) {
    if (use_dense_) {
        Eigen::MatrixXd Kd = Eigen::MatrixXd(K);
        for (int i = 0; i < n_; ++i) Kd(i, i) += sign[i] * reg;
        factorize_dense(Kd);
        for (int i = 0; i < n_; ++i)
            if (std::abs(dense_d_[i]) <= kPivotFloor) return false;
        return true;
    }

    // Refresh numeric values of the permuted upper triangle. The pattern of K
    // is fixed across calls, so the scatter positions were precomputed.
    std::fill(up_val_.begin(), up_val_.end(), 0.0);
    {
        size_t pos = 0;
        for (int j = 0; j < K.outerSize(); ++j)
            for (Eigen::SparseMatrix<double>::InnerIterator it(K, j); it; ++it) {
                int dst = scatter_map_[pos++];
                if (dst >= 0) up_val_[dst] += it.value();
            }
    }

    // Up-looking LDL^T with 1x1 pivots.
    std::vector<int> next_in_col(l_col_ptr_.begin(), l_col_ptr_.end() - 1);
    std::fill(work_mark_.begin(), work_mark_.end(), -1);
    std::fill(work_x_.begin(), work_x_.end(), 0.0);
    bool ok = true;
    for (int j = 0; j < n_; ++j) {
        double diag = sign[perm_[j]] * reg;
        int top = n_;
        for (int ptr = up_col_ptr_[j]; ptr < up_col_ptr_[j + 1]; ++ptr) {
            int i = up_row_ind_[ptr];
            if (i == j) {
                diag += up_val_[ptr];
                continue;
            }
            work_x_[i] += up_val_[ptr];
            int len = 0;
            int k = i;
            while (k != -1 && k < j && work_mark_[k] != j) {
                work_stack_[len++] = k;
                work_mark_[k] = j;
                k = etree_[k];
            }
            while (len > 0) work_stack_[--top] = work_stack_[--len];
        }
        for (int s = top; s < n_; ++s) {
            int k = work_stack_[s];
            double yk = work_x_[k];
            work_x_[k] = 0.0;
            for (int ptr = l_col_ptr_[k]; ptr < next_in_col[k]; ++ptr)
                work_x_[l_row_ind_[ptr]] -= l_val_[ptr] * yk;
            double ljk = yk * dinv_[k];
            l_row_ind_[next_in_col[k]] = j;
            l_val_[next_in_col[k]] = ljk;
            ++next_in_col[k];
            diag -= yk * ljk;
        }
        if (std::abs(diag) <= kPivotFloor) {
            ok = false;
            diag = (diag >= 0 ? kPivotFloor : -kPivotFloor);
        }
        d_[j] = diag;
        dinv_[j] = 1.0 / diag;
    }
    if (!ok && n_ <= kDenseLimit) {
        Eigen::MatrixXd Kd = Eigen::MatrixXd(K);
        for (int i = 0; i < n_; ++i) Kd(i, i) += sign[i] * reg;
        use_dense_ = true;
        factorize_dense(Kd);
        for (int i = 0; i < n_; ++i)
            if (std::abs(dense_d_[i]) <= kPivotFloor) return false;
        return true;
    }
    return ok;
}

void QdLdl::factorize_dense(const Eigen::MatrixXd& K) {
    dense_l_ = Eigen::MatrixXd::Identity(n_, n_);
    dense_d_.resize(n_);
    for (int j = 0; j < n_; ++j) {
        double diag = K(j, j);
        for (int k = 0; k < j; ++k)
            diag -= dense_l_(j, k) * dense_l_(j, k) * dense_d_[k];
        if (std::abs(diag) <= kPivotFloor)
            diag = (diag >= 0 ? kPivotFloor : -kPivotFloor);
        dense_d_[j] = diag;
        for (int i = j + 1; i < n_; ++i) {
            double v = K(i, j);
            for (int k = 0; k < j; ++k)
                v -= dense_l_(i, k) * dense_l_(j, k) * dense_d_[k];
            dense_l_(i, j) = v / diag;
        }
    }
}

void QdLdl::solve(Eigen::VectorXd& b) const {
    if (use_dense_) {
        dense_l_.triangularView<Eigen::UnitLower>().solveInPlace(b);
        b.array() /= dense_d_.array();
        dense_l_.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(b);
        return;
    }
    Eigen::VectorXd pb(n_);
    for (int i = 0; i < n_; ++i) pb[i] = b[perm_[i]];
    for (int j = 0; j < n_; ++j) {
        double xj = pb[j];
        if (xj != 0.0)
            for (int ptr = l_col_ptr_[j]; ptr < l_col_ptr_[j + 1]; ++ptr)
                pb[l_row_ind_[ptr]] -= l_val_[ptr] * xj;
    }
    for (int j = 0; j < n_; ++j) pb[j] *= dinv_[j];
    for (int j = n_ - 1; j >= 0; --j) {
        double xj = pb[j];
        for (int ptr = l_col_ptr_[j]; ptr < l_col_ptr_[j + 1]; ++ptr)
            xj -= l_val_[ptr] * pb[l_row_ind_[ptr]];
        pb[j] = xj;
    }
    for (int i = 0; i < n_; ++i) b[perm_[i]] = pb[i];
}

} // namespace restore
