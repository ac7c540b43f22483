// Copyright (c) 2026 The funnelrank Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "funnelrank/journey/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace funnelrank::journey {

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json schema_to_json(const DatasetSchema& schema) {
  nlohmann::json names = nlohmann::json::array();
  for (Milestone m : kAllMilestones) names.push_back(std::string(to_string(m)));
  return {{"listing_dim", schema.listing_dim},
          {"context_dim", schema.context_dim},
          {"context_names", schema.context_names},
          {"milestones", names},
          {"window_days", schema.window_days}};
}

DatasetSchema schema_from_json(const nlohmann::json& j) {
  DatasetSchema s;
  s.listing_dim = j.at("listing_dim").get<int>();
  s.context_dim = j.at("context_dim").get<int>();
  s.context_names = j.at("context_names").get<std::vector<std::string>>();
  s.window_days = j.at("window_days").get<double>();
  if (j.contains("milestones")) {
    const auto names = j.at("milestones").get<std::vector<std::string>>();
    if (names.size() != kMilestoneCount) throw FormatError("schema: expected 10 milestone names");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] != to_string(kAllMilestones[i])) throw FormatError("schema: unexpected milestone " + names[i]);
    }
  }
  if (s.listing_dim <= 0 || s.context_dim <= 0) throw FormatError("schema: widths must be positive");
  if (static_cast<int>(s.context_names.size()) != s.context_dim) {
    throw FormatError("schema: context_names must have context_dim entries");
  }
  return s;
}

nlohmann::json journey_to_json(const JourneyRecord& journey) {
  nlohmann::json searches = nlohmann::json::array();
  for (const auto& s : journey.searches) {
    nlohmann::json imps = nlohmann::json::array();
    for (const auto& imp : s.impressions) {
      nlohmann::json labels = nlohmann::json::object();
      for (Milestone m : kAllMilestones) {
        if (imp.labels[m]) labels[std::string(to_string(m))] = true;
      }
      imps.push_back({{"listing_id", imp.listing_id},
                      {"position", imp.position},
                      {"features", vector_to_json(imp.features)},
                      {"labels", labels}});
    }
    searches.push_back({{"search_id", s.search_id},
                        {"t_days", s.t_days},
                        {"context", vector_to_json(s.context)},
                        {"impressions", imps}});
  }
  return {{"guest_id", journey.guest_id},
          {"outcome", std::string(to_string(journey.outcome))},
          {"searches", searches}};
}

JourneyRecord journey_from_json(const nlohmann::json& j) {
  JourneyRecord journey;
  journey.guest_id = j.at("guest_id").get<std::uint64_t>();
  for (const auto& sj : j.at("searches")) {
    SearchRecord s;
    s.search_id = sj.at("search_id").get<std::uint64_t>();
    s.t_days = sj.at("t_days").get<double>();
    s.context = vector_from_json(sj.at("context"));
    for (const auto& ij : sj.at("impressions")) {
      ImpressionRecord imp;
      imp.listing_id = ij.at("listing_id").get<ListingId>();
      imp.position = ij.at("position").get<int>();
      imp.features = vector_from_json(ij.at("features"));
      for (const auto& [key, value] : ij.at("labels").items()) {
        const auto m = parse_milestone(key);
        if (!m) throw FormatError("unknown label '" + key + "'");
        imp.labels.set(*m, value.get<bool>());
      }
      s.impressions.push_back(std::move(imp));
    }
    journey.searches.push_back(std::move(s));
  }
  journey.outcome = j.contains("outcome") ? parse_outcome(j.at("outcome").get<std::string>())
                                          : derive_outcome(journey);
  return journey;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << nlohmann::json{{"schema", schema_to_json(dataset.schema)}}.dump() << '\n';
  for (const auto& j : dataset.journeys) out << journey_to_json(j).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_schema = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_schema) {
        if (!j.contains("schema")) throw FormatError("first record must be the schema header");
        d.schema = schema_from_json(j.at("schema"));
        have_schema = true;
        continue;
      }
      d.journeys.push_back(journey_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_schema) throw FormatError("dataset has no schema header");
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset(out, dataset);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_dataset(in);
}

}  // namespace funnelrank::journey
