/* Copyright 2026 The Dredge Authors. All Rights Reserved.

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

#include "dredge/profiler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dredge/error.hpp"
#include "dredge/model_io.hpp"

namespace dredge {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(FormatError::Reason::kMalformed,
                      where + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits "k=v;k=v" into a map; rejects duplicates and missing '='.
std::map<std::string, std::string> parse_record(std::string_view line,
                                                const std::string& where) {
  std::map<std::string, std::string> fields;
  while (!line.empty()) {
    const std::size_t semi = line.find(';');
    const std::string_view part = trim(line.substr(0, semi));
    line = semi == std::string_view::npos ? std::string_view{} : line.substr(semi + 1);
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(FormatError::Reason::kMalformed,
                        where + ": expected key=value, got '" + std::string(part) + "'");
    }
    const std::string key(trim(part.substr(0, eq)));
    if (!fields.emplace(key, std::string(trim(part.substr(eq + 1)))).second) {
      throw FormatError(FormatError::Reason::kMalformed,
                        where + ": duplicate key '" + key + "'");
    }
  }
  return fields;
}

const std::string& required(const std::map<std::string, std::string>& fields,
                            const std::string& key, const std::string& where) {
  const auto it = fields.find(key);
  if (it == fields.end()) {
    throw FormatError(FormatError::Reason::kMalformed,
                      where + ": missing key '" + key + "'");
  }
  return it->second;
}

template <typename F>
void for_each_record(std::string_view text, F&& f) {
  int line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    f(parse_record(line, where), where);
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int device_rank(const std::string& name) {
  const auto it = std::find(kDeviceClasses.begin(), kDeviceClasses.end(), name);
  return it == kDeviceClasses.end()
             ? static_cast<int>(kDeviceClasses.size())
             : static_cast<int>(it - kDeviceClasses.begin());
}

}  // namespace

MacReport count_macs(const ModelGraph& graph) {
  const ShapeReport shapes = validate(graph);
  MacReport report;
  for (const OpNode& node : graph.nodes) {
    const TensorInfo& in = shapes.tensors.at(node.inputs[0]);
    const TensorInfo& out = shapes.tensors.at(node.output);
    const std::int64_t out_px = out.shape.pixels();
    std::int64_t macs = 0;
    switch (node.kind()) {
      case OpKind::kConv2D: {
        const auto& a = std::get<ConvAttrs>(node.attrs);
        macs = std::int64_t{a.kernel_h} * a.kernel_w * (in.shape.c / a.groups) *
               a.out_channels * out_px;
        break;
      }
      case OpKind::kDwSepBlock: {
        const auto& a = std::get<DepthwiseSeparableAttrs>(node.attrs);
        macs = 9 * in.shape.c * out_px + in.shape.c * a.out_channels * out_px;
        break;
      }
      case OpKind::kFire: {
        const auto& a = std::get<FireAttrs>(node.attrs);
        macs = out_px * (in.shape.c * a.squeeze_channels +
                         std::int64_t{a.squeeze_channels} * a.expand1_channels +
                         9 * std::int64_t{a.squeeze_channels} * a.expand3_channels);
        break;
      }
      case OpKind::kDense:
        macs = in.shape.n * in.shape.c * std::get<DenseAttrs>(node.attrs).out_features;
        break;
      default:
        break;
    }
    report.node_macs.push_back(macs);
    report.node_output_bytes.push_back(out.byte_size());
    report.total += macs;
  }
  return report;
}

MemoryPlan plan_memory(const ModelGraph& graph) {
  MemoryPlan plan = plan_activations(graph, validate(graph));
  plan.rom_bytes = estimate_rom(graph);
  return plan;
}

std::size_t estimate_rom(const ModelGraph& graph) {
  validate(graph);
  return serialized_size(graph);
}

void check_profile(const DeviceProfile& p) {
  if (!(p.throughput > 0.0) || !std::isfinite(p.throughput)) {
    throw ValidationError("device '" + p.name + "': throughput must be positive");
  }
  if (!(p.fixed_overhead_ms >= 0.0) || !std::isfinite(p.fixed_overhead_ms)) {
    throw ValidationError("device '" + p.name + "': overhead must be non-negative");
  }
}

std::vector<DeviceProfile> fit_device_profiles(
    const std::vector<LatencyAnchor>& anchors,
    const std::map<std::string, std::int64_t>& model_macs,
    const std::map<std::string, double>& overhead_ms) {
  if (anchors.empty()) throw ValidationError("no latency anchors to fit");
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, int>> sums;
  for (const LatencyAnchor& a : anchors) {
    const auto macs = model_macs.find(a.model);
    if (macs == model_macs.end()) {
      throw ValidationError("no MAC count for anchored model '" + a.model + "'");
    }
    const auto ov = overhead_ms.find(a.device);
    const double overhead = ov == overhead_ms.end() ? 0.0 : ov->second;
    if (!(a.observed_ms > overhead)) {
      throw ValidationError("anchor " + a.model + " on " + a.device + ": observed " +
                            format_double(a.observed_ms) +
                            " ms does not exceed the fixed overhead of " +
                            format_double(overhead) + " ms");
    }
    if (sums.find(a.device) == sums.end()) order.push_back(a.device);
    auto& [sum, n] = sums[a.device];
    sum += static_cast<double>(macs->second) / (a.observed_ms - overhead);
    ++n;
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
    return device_rank(x) < device_rank(y);
  });
  std::vector<DeviceProfile> out;
  for (const std::string& device : order) {
    const auto ov = overhead_ms.find(device);
    const auto& [sum, n] = sums.at(device);
    out.push_back({device, sum / n, ov == overhead_ms.end() ? 0.0 : ov->second});
  }
  return out;
}

double estimate_latency(std::int64_t macs, const DeviceProfile& profile) {
  check_profile(profile);
  return static_cast<double>(macs) / profile.throughput + profile.fixed_overhead_ms;
}

double estimate_latency(const ModelGraph& graph, const DeviceProfile& profile) {
  return estimate_latency(count_macs(graph).total, profile);
}

std::vector<DeviceProfile> parse_profiles(std::string_view text) {
  std::vector<DeviceProfile> out;
  for_each_record(text, [&](const auto& fields, const std::string& where) {
    DeviceProfile p;
    p.name = required(fields, "name", where);
    p.throughput = parse_double(required(fields, "throughput", where), where);
    p.fixed_overhead_ms = parse_double(required(fields, "overhead_ms", where), where);
    if (fields.size() != 3) {
      throw FormatError(FormatError::Reason::kMalformed, where + ": unknown key");
    }
    try {
      check_profile(p);
    } catch (const ValidationError& e) {
      throw FormatError(FormatError::Reason::kMalformed, where + ": " + e.what());
    }
    for (const auto& q : out) {
      if (q.name == p.name) {
        throw FormatError(FormatError::Reason::kMalformed,
                          where + ": duplicate device '" + p.name + "'");
      }
    }
    out.push_back(std::move(p));
  });
  if (out.empty()) {
    throw FormatError(FormatError::Reason::kMalformed, "profile file lists no devices");
  }
  return out;
}

std::string format_profiles(const std::vector<DeviceProfile>& profiles,
                            const std::vector<std::string>& header) {
  std::string out;
  for (const std::string& h : header) out += "# " + h + "\n";
  for (const DeviceProfile& p : profiles) {
    out += "name=" + p.name + ";throughput=" + format_double(p.throughput) +
           ";overhead_ms=" + format_double(p.fixed_overhead_ms) + "\n";
  }
  return out;
}

std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path) {
  return parse_profiles(read_text(path));
}

std::vector<LatencyAnchor> parse_anchors(std::string_view text) {
  std::vector<LatencyAnchor> out;
  for_each_record(text, [&](const auto& fields, const std::string& where) {
    LatencyAnchor a;
    a.model = required(fields, "model", where);
    a.device = required(fields, "device", where);
    a.observed_ms = parse_double(required(fields, "latency_ms", where), where);
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<LatencyAnchor> load_anchors(const std::filesystem::path& path) {
  return parse_anchors(read_text(path));
}

std::string fit_report_profiles(const std::vector<LatencyAnchor>& anchors,
                                const std::map<std::string, std::int64_t>& model_macs,
                                const std::string& fit_model) {
  std::vector<LatencyAnchor> fit;
  for (const auto& a : anchors) {
    if (a.model == fit_model) fit.push_back(a);
  }
  const std::vector<DeviceProfile> profiles = fit_device_profiles(fit, model_macs);
  std::vector<std::string> header;
  header.push_back("Device profiles: latency_ms = macs / throughput + overhead_ms.");
  header.push_back("Fitted on the " + fit_model + " anchors (" +
                   format_double(static_cast<double>(model_macs.at(fit_model))) +
                   " MACs), overhead 0.");
  header.push_back("Misfit on the remaining anchors (predicted / measured):");
  for (const auto& a : anchors) {
    if (a.model == fit_model) continue;
    const auto p = std::find_if(profiles.begin(), profiles.end(),
                                [&](const auto& q) { return q.name == a.device; });
    const auto macs = model_macs.find(a.model);
    if (p == profiles.end() || macs == model_macs.end()) continue;
    const double predicted = estimate_latency(macs->second, *p);
    char line[160];
    std::snprintf(line, sizeof(line), "  %-11s %-15s predicted %12.1f ms  measured %10.1f ms  ratio %.3f",
                  a.model.c_str(), a.device.c_str(), predicted, a.observed_ms,
                  predicted / a.observed_ms);
    header.emplace_back(line);
  }
  return format_profiles(profiles, header);
}

}  // namespace dredge
