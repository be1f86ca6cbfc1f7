// Copyright (c) 2026 The groupseg Authors
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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace groupseg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool lines = true;  // false: scatter markers only
  int width = 720;
  int height = 420;
};

/// Self-contained SVG document with axes, ticks and a legend.
std::string render_chart_svg(const std::vector<Series>& series, const ChartSpec& spec);

/// Numeric columns of a CSV file with a header row. Columns holding any
/// non-numeric cell are dropped.
std::map<std::string, std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

}  // namespace groupseg
