/* Copyright 2026 The MirrorNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mirrornet/tensor.hpp"

namespace mirrornet::eval {

// Pearson correlation. Equal lengths of at least 2 are required
// (std::invalid_argument otherwise). When either series is constant the
// result is defined as 0 and a warning is logged.
double ppmc(std::span<const double> x, std::span<const double> y);
double ppmc(std::span<const float> x, std::span<const float> y);

struct PpmcReport {
  std::vector<std::string> channels;      // channel names, in row order
  std::vector<double> per_channel;        // mean over items
  double avg_6tvs = 0.0;                  // mean of the first six channels
  double avg_all = 0.0;                   // mean of every channel
  std::vector<std::string> item_ids;
  std::vector<std::vector<double>> per_item;  // [item][channel]
};

// Per channel, the mean of per-item correlations between matching rows of
// estimates[i] and truths[i]. Throws ShapeError on any shape mismatch.
PpmcReport ppmc_report(std::span<const Tensor<float>> estimates,
                       std::span<const Tensor<float>> truths,
                       std::span<const std::string> ids = {});

// One-row table: model,<channels...>,avg_6tvs,avg_all.
std::string table_header(const PpmcReport& report);
std::string table_row(std::string_view label, const PpmcReport& report);
void write_table_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, PpmcReport>>& rows);
// id,<channels...> per item.
void write_items_csv(const std::filesystem::path& path, const PpmcReport& report);
// {avg_6tvs, avg_all, per_channel: {name: value}}.
nlohmann::json summary_json(const PpmcReport& report);

struct TrajectoryRow {
  std::size_t frame;
  std::string channel;
  double truth;
  double estimate;
};

// Long format: frame,channel,truth,estimate; channels x k rows.
void export_trajectories(const std::filesystem::path& path, const Tensor<float>& estimate,
                         const Tensor<float>& truth);
std::vector<TrajectoryRow> read_trajectory_export(const std::filesystem::path& path);

}  // namespace mirrornet::eval
