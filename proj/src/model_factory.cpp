#include "gelboot/model_factory.hpp"

#include <fstream>

#include <json.hpp>

#include "gelboot/matching_model.hpp"
#include "gelboot/panel_model.hpp"

namespace gelboot {

std::unique_ptr<MomentModel> model_from_json(const std::string& json_text,
                                             const Dataset& data) {
  const auto j = nlohmann::json::parse(json_text);
  const std::string type = j.at("type").get<std::string>();
  if (type == "panel") {
    const int T = j.at("T").get<int>();
    return std::make_unique<PanelMomentModel>(PanelMomentModel::for_dataset(T, data));
  }
  if (type == "matching") {
    const Eigen::Index y_col = data.column_index(j.at("y").get<std::string>());
    std::vector<Eigen::Index> x_cols;
    for (const auto& name : j.at("x")) x_cols.push_back(data.column_index(name.get<std::string>()));
    const bool intercept = j.value("intercept", true);
    std::vector<MatchingMomentModel::Monomial> monomials;
    Eigen::VectorXd targets(j.at("match").size());
    Eigen::Index k = 0;
    for (const auto& entry : j.at("match")) {
      MatchingMomentModel::Monomial mono;
      for (const auto& term : entry.at("terms"))
        mono.emplace_back(data.column_index(term.at(0).get<std::string>()),
                          term.at(1).get<int>());
      monomials.push_back(std::move(mono));
      targets(k++) = entry.at("target").get<double>();
    }
    return std::make_unique<MatchingMomentModel>(y_col, std::move(x_cols), intercept,
                                                 std::move(monomials), std::move(targets));
  }
  throw std::invalid_argument("unknown model type '" + type + "'");
}

std::unique_ptr<MomentModel> model_from_json_file(const std::string& path,
                                                  const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text, data);
}

}  // namespace gelboot
