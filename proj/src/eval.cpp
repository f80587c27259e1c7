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

#include "mirrornet/eval.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mirrornet/data.hpp"

namespace mirrornet::eval {
namespace {

template <typename T>
double pearson(std::span<const T> x, std::span<const T> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("ppmc: length mismatch (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw std::invalid_argument("ppmc: need at least two samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    spdlog::warn("ppmc: constant series, correlation defined as 0");
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string channel_name(std::size_t c) {
  return c < data::kChannelNames.size() ? std::string(data::kChannelNames[c])
                                        : "ch" + std::to_string(c);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(9);
  return out;
}

}  // namespace

double ppmc(std::span<const double> x, std::span<const double> y) { return pearson(x, y); }
double ppmc(std::span<const float> x, std::span<const float> y) { return pearson(x, y); }

PpmcReport ppmc_report(std::span<const Tensor<float>> estimates,
                       std::span<const Tensor<float>> truths, std::span<const std::string> ids) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw ShapeError("ppmc_report: " + std::to_string(estimates.size()) + " estimates for " +
                     std::to_string(truths.size()) + " truths");
  }
  if (!ids.empty() && ids.size() != truths.size()) {
    throw std::invalid_argument("ppmc_report: id count does not match item count");
  }
  const std::size_t channels = truths.front().rows();
  PpmcReport report;
  for (std::size_t c = 0; c < channels; ++c) report.channels.push_back(channel_name(c));
  report.per_channel.assign(channels, 0.0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (estimates[i].shape() != truths[i].shape() || truths[i].rows() != channels) {
      throw ShapeError("ppmc_report: item " + std::to_string(i) + " estimate " +
                       shape_str(estimates[i].shape()) + " vs truth " +
                       shape_str(truths[i].shape()));
    }
    std::vector<double> row(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      row[c] = ppmc(estimates[i].row(c), truths[i].row(c));
      report.per_channel[c] += row[c];
    }
    report.per_item.push_back(std::move(row));
    report.item_ids.push_back(ids.empty() ? std::to_string(i) : ids[i]);
  }
  for (double& v : report.per_channel) v /= static_cast<double>(truths.size());
  const std::size_t tvs = std::min(channels, data::kNumTVs);
  for (std::size_t c = 0; c < channels; ++c) {
    if (c < tvs) report.avg_6tvs += report.per_channel[c];
    report.avg_all += report.per_channel[c];
  }
  report.avg_6tvs /= static_cast<double>(tvs);
  report.avg_all /= static_cast<double>(channels);
  return report;
}

std::string table_header(const PpmcReport& report) {
  std::string out = "model";
  for (const auto& c : report.channels) out += "," + c;
  return out + ",avg_6tvs,avg_all";
}

std::string table_row(std::string_view label, const PpmcReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << label;
  for (double v : report.per_channel) out << ',' << v;
  out << ',' << report.avg_6tvs << ',' << report.avg_all;
  return out.str();
}

void write_table_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, PpmcReport>>& rows) {
  if (rows.empty()) throw std::invalid_argument("write_table_csv: no rows");
  auto out = open_out(path);
  out << table_header(rows.front().second) << '\n';
  for (const auto& [label, report] : rows) out << table_row(label, report) << '\n';
}

void write_items_csv(const std::filesystem::path& path, const PpmcReport& report) {
  auto out = open_out(path);
  out << "id";
  for (const auto& c : report.channels) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < report.per_item.size(); ++i) {
    out << report.item_ids[i];
    for (double v : report.per_item[i]) out << ',' << v;
    out << '\n';
  }
}

nlohmann::json summary_json(const PpmcReport& report) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < report.channels.size(); ++c) {
    per[report.channels[c]] = report.per_channel[c];
  }
  return {{"avg_6tvs", report.avg_6tvs}, {"avg_all", report.avg_all}, {"per_channel", per}};
}

void export_trajectories(const std::filesystem::path& path, const Tensor<float>& estimate,
                         const Tensor<float>& truth) {
  if (estimate.shape() != truth.shape() || truth.rank() != 2) {
    throw ShapeError("export_trajectories: estimate " + shape_str(estimate.shape()) +
                     " vs truth " + shape_str(truth.shape()));
  }
  auto out = open_out(path);
  out << "frame,channel,truth,estimate\n";
  for (std::size_t t = 0; t < truth.cols(); ++t) {
    for (std::size_t c = 0; c < truth.rows(); ++c) {
      char a[32], b[32];
      const auto ra = std::to_chars(a, a + sizeof a, truth.at(c, t));
      const auto rb = std::to_chars(b, b + sizeof b, estimate.at(c, t));
      out << t << ',' << channel_name(c) << ',' << std::string_view(a, ra.ptr - a) << ','
          << std::string_view(b, rb.ptr - b) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<TrajectoryRow> read_trajectory_export(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "frame,channel,truth,estimate") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string frame, channel, truth, estimate;
    if (!std::getline(fields, frame, ',') || !std::getline(fields, channel, ',') ||
        !std::getline(fields, truth, ',') || !std::getline(fields, estimate, ',')) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    rows.push_back({std::stoul(frame), channel, std::stod(truth), std::stod(estimate)});
  }
  return rows;
}

}  // namespace mirrornet::eval
