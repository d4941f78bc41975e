#pragma once

#include "restore/common.hpp"

#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace restore {

/// Variable families of the multi-step restoration model. Subscripts are
/// (a, b) pairs whose meaning depends on the family; unused subscripts are 0.
enum class Var : int {
    switch_on,   // edge e, step s            -- binary switch energization
    step_at,     // slot t, step s            -- binary slot-to-step assignment
    served,      // off-outage bus n, slot t  -- binary load pickup
    orient,      // edge e * 2 + dir, step s  -- edge orientation, [0,1]
    flow_unit,   // edge e * 2 + dir, step s  -- auxiliary unit-demand flow
    zone_on,     // zone k, step s            -- zone energization, [0,1]
    line_on,     // area line n, step s       -- line energization, [0,1]
    sec_open,    // sectionalizer n, step s   -- opened indicator, [0,1]
    step_start,  // step s                    -- deployment time, minutes
    current_sq,  // line li, slot t           -- squared current magnitude
    flow_p,      // line li, slot t           -- sending-end active flow
    flow_q,      // line li, slot t           -- sending-end reactive flow
    volt_sq,     // bus b, slot t             -- squared voltage magnitude
    inj_p,       // resource g, slot t        -- active injection
    inj_q,       // resource g, slot t        -- reactive injection
    reservoir,   // dg n, slot t              -- stored energy, p.u.-hours
    aux,         // cone lowering auxiliaries
};

const char* var_family_name(Var v);

/// Bijection between (family, subscripts) and dense column positions.
/// Registration order defines the column order, so builders that register in
/// fixed loops produce identical indices for identical inputs.
class VariableIndex {
public:
    int add(Var family, int a, int b) {
        auto key = std::make_tuple(static_cast<int>(family), a, b);
        auto [it, fresh] = map_.emplace(key, static_cast<int>(reverse_.size()));
        if (!fresh) throw ModelError("variable registered twice: " + name(it->second));
        reverse_.push_back(key);
        return it->second;
    }
    int col(Var family, int a, int b) const {
        auto it = map_.find(std::make_tuple(static_cast<int>(family), a, b));
        if (it == map_.end())
            throw ModelError(std::string("unknown variable ") +
                             var_family_name(family) + "[" + std::to_string(a) +
                             "," + std::to_string(b) + "]");
        return it->second;
    }
    bool has(Var family, int a, int b) const {
        return map_.count(std::make_tuple(static_cast<int>(family), a, b)) > 0;
    }
    int size() const { return static_cast<int>(reverse_.size()); }
    Var family(int col) const {
        return static_cast<Var>(std::get<0>(reverse_.at(col)));
    }
    std::tuple<int, int, int> key(int col) const { return reverse_.at(col); }
    std::string name(int col) const;
    std::vector<Var> families_present() const;

private:
    std::map<std::tuple<int, int, int>, int> map_;
    std::vector<std::tuple<int, int, int>> reverse_;
};

/// Sparse affine expression over the variable index.
struct LinExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    LinExpr& add(int col, double coef) {
        if (coef != 0.0) terms.emplace_back(col, coef);
        return *this;
    }
    double eval(const std::vector<double>& x) const {
        double v = constant;
        for (auto [c, w] : terms) v += w * x[c];
        return v;
    }
};

/// One linear row: lo <= sum coef*var <= up.
struct LinRow {
    std::vector<std::pair<int, double>> coef;
    double lo = 0.0, up = 0.0;
    std::string tag;
    bool big_m = false; // participates in the big-M slack audit
};

struct ConstraintBlock {
    std::vector<LinRow> rows;

    LinRow& add(std::string tag, double lo, double up) {
        rows.push_back({{}, lo, up, std::move(tag), false});
        return rows.back();
    }
    void append(ConstraintBlock&& other) {
        for (auto& r : other.rows) rows.push_back(std::move(r));
    }
    size_t size() const { return rows.size(); }
};

/// Second-order-cone block over affine expressions: ||exprs[1..]|| <= exprs[0].
struct ConeBlock {
    std::vector<LinExpr> exprs;
    std::string tag;
};

} // namespace restore
