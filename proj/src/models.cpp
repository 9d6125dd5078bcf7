#include "dsagg/models.hpp"

#include <array>
#include <string>

#include "dsagg/errors.hpp"

namespace dsagg {

namespace {

constexpr std::array<std::pair<ModelTag, std::string_view>, 8> kTagNames{{
    {ModelTag::Linear, "linear"},
    {ModelTag::DSVStar, "dsv_star"},
    {ModelTag::DSULBS, "dsulbs"},
    {ModelTag::Bilinear, "bilinear"},
    {ModelTag::LarchInf, "larch"},
    {ModelTag::ArchInf, "arch"},
    {ModelTag::Garch11, "garch11"},
    {ModelTag::Arch1, "arch1"},
}};

}  // namespace

std::string_view to_string(ModelTag tag) {
    for (const auto& [t, name] : kTagNames)
        if (t == tag) return name;
    return "unknown";
}

ModelTag model_tag_from_string(std::string_view name) {
    for (const auto& [t, n] : kTagNames)
        if (n == name) return t;
    throw ConfigError("unknown model tag '" + std::string(name) + "'");
}

ModelTag tag_of(const CoefficientModel& model) {
    return std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) return ModelTag::Linear;
            else if constexpr (std::is_same_v<T, DsvStarModel>) return ModelTag::DSVStar;
            else if constexpr (std::is_same_v<T, DsulbsModel>) return ModelTag::DSULBS;
            else if constexpr (std::is_same_v<T, BilinearModel>) return ModelTag::Bilinear;
            else if constexpr (std::is_same_v<T, LarchModel>) return ModelTag::LarchInf;
            else if constexpr (std::is_same_v<T, ArchModel>) return ModelTag::ArchInf;
            else if constexpr (std::is_same_v<T, Garch11Model>) return ModelTag::Garch11;
            else return ModelTag::Arch1;
        },
        model);
}

bool is_dsv_star(const CoefficientModel& model) { return tag_of(model) != ModelTag::DSULBS; }

}  // namespace dsagg
