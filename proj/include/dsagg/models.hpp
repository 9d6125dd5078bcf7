#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dsagg/coefficient_maps.hpp"

namespace dsagg {

enum class ModelTag { Linear, DSVStar, DSULBS, Bilinear, LarchInf, ArchInf, Garch11, Arch1 };

std::string_view to_string(ModelTag tag);
ModelTag model_tag_from_string(std::string_view name);

/// Z_t = sum_k c_k(y) eps_{t-k}; a DSV* process of order one.
struct LinearModel {
    SequenceMap c;
};

/// One ordered-index chaos term c_{k: l_1 < ... < l_k}(y) eps_{t-l_1} ... eps_{t-l_k}.
struct ChaosTerm {
    std::vector<int> lags;
    AffineMap value;
};

/// Explicit DSV* expansion given as a list of ordered-index terms.
struct DsvStarModel {
    AffineMap constant = AffineMap::constant(0.0);
    std::vector<ChaosTerm> terms;
};

enum class DsulbsShift {
    ClippedLinear,  ///< Z_t = f_T(sum_k c_k eps_{t-k})
    Product,        ///< Z_t = eps_t (c_0 + sum_{k != 0} c_k eps_{t-k}), bounded innovations only
};

struct DsulbsModel {
    DsulbsShift shift = DsulbsShift::ClippedLinear;
    SequenceMap c;
    double clip = std::numeric_limits<double>::infinity();
};

/// Z_t = sum_k a_k Z_{t-k} + (b_0 + sum_k b_k Z_{t-k}) eps_t, with a and b starting at lag 1.
struct BilinearModel {
    AffineMap b0;
    SequenceMap a;
    SequenceMap b;
};

/// Z_t = (b_0 + sum_k b_k Z_{t-k}) eps_t with real coefficients.
struct LarchModel {
    AffineMap b0;
    SequenceMap b;
};

/// Nonnegative ARCH(inf): Z_t = (b_0 + sum_k b_k Z_{t-k}) eps_t, eps_t >= 0 with moments
/// lambda1 = E eps, lambda2 = E eps^2.
struct ArchModel {
    AffineMap b0;
    SequenceMap b;
    double lambda1 = 1.0;
    double lambda2 = 3.0;
};

/// sigma^2_t = alpha0 + alpha r^2_{t-1} + beta sigma^2_{t-1}, Z_t = r_t^2, eps_t = xi_t^2.
struct Garch11Model {
    AffineMap alpha0;
    AffineMap alpha;
    AffineMap beta;
    double lambda1 = 1.0;
    double lambda2 = 3.0;
};

struct Arch1Model {
    AffineMap alpha0;
    AffineMap alpha;
    double lambda1 = 1.0;
    double lambda2 = 3.0;
};

using CoefficientModel = std::variant<LinearModel, DsvStarModel, DsulbsModel, BilinearModel,
                                      LarchModel, ArchModel, Garch11Model, Arch1Model>;

ModelTag tag_of(const CoefficientModel& model);

/// True for models with an ordered-index (DSV*) chaos representation.
bool is_dsv_star(const CoefficientModel& model);

/// Truncation of the infinite objects attached to a model.
struct Truncation {
    int k_max = 8;     ///< chaos order (Linear/DSV*) or product depth (bilinear family)
    int m = 64;        ///< lag window
    double prune_tol = 1e-13;  ///< drop partial products below this fraction of the prefactor
    std::size_t max_terms = 4'000'000;
};

}  // namespace dsagg
