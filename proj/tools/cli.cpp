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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dredge/builders.hpp"
#include "dredge/error.hpp"
#include "dredge/evalbench.hpp"
#include "dredge/model_io.hpp"
#include "dredge/profiler.hpp"
#include "dredge/quantizer.hpp"

#ifndef DREDGE_DEFAULT_PROFILE
#define DREDGE_DEFAULT_PROFILE "profiles/devices.profile"
#endif

namespace dredge::cli {

namespace {

struct Options {
  std::uint64_t seed = kDefaultSeed;
  std::string output;
  bool machine = false;

  std::string arch;
  double width = 1.0;
  int groups = 3;
  std::string weights_manifest;
  std::string export_dir;

  std::string model;
  std::string calib_dir;
  std::size_t limit = 32;
  std::string image;
  std::string dataset;
  std::string subset = "all";
  bool stratified = false;
  std::string profiles = DREDGE_DEFAULT_PROFILE;
  std::string fit_anchors;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

class Context {
 public:
  Context(const Options& o, std::ostream& out) : o_(o), out_(out) {}

  // The primary result goes to --output when given, else stdout.
  void emit(const std::string& text) const {
    if (o_.output.empty()) {
      out_ << text;
      return;
    }
    std::ofstream f(o_.output, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + o_.output + "' for writing");
    f << text;
    if (!f) throw IoError("error writing '" + o_.output + "'");
  }

  std::ostream& out() const { return out_; }
  const Options& opts() const { return o_; }

 private:
  const Options& o_;
  std::ostream& out_;
};

std::string kv_block(const std::vector<std::pair<std::string, std::string>>& rows,
                     bool machine) {
  std::string s;
  for (const auto& [k, v] : rows) {
    if (machine) {
      s += k + "=" + v + "\n";
    } else {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%-16s %s\n", k.c_str(), v.c_str());
      s += buf;
    }
  }
  return s;
}

ModelGraph build_arch(const Options& o, bool width_set, bool groups_set) {
  if (groups_set && o.arch != "shufflenet") {
    throw UsageError("--groups applies to shufflenet only");
  }
  if (width_set && o.arch != "mobilenet" && o.arch != "shufflenet") {
    throw UsageError("--width applies to mobilenet and shufflenet only");
  }
  if (o.arch == "mobilenet") {
    MobileNetConfig c;
    c.width_multiplier = o.width;
    c.seed = o.seed;
    return build_mobilenet(c);
  }
  if (o.arch == "shufflenet") {
    ShuffleNetConfig c;
    c.groups = o.groups;
    c.width_multiplier = o.width;
    c.seed = o.seed;
    return build_shufflenet(c);
  }
  if (o.arch == "squeezenet") {
    SqueezeNetConfig c;
    c.seed = o.seed;
    return build_squeezenet(c);
  }
  if (o.arch == "customdnn") {
    CustomDnnConfig c;
    c.seed = o.seed;
    return build_custom_dnn(c);
  }
  throw UsageError("unknown architecture '" + o.arch +
                   "' (expected mobilenet, shufflenet, squeezenet or customdnn)");
}

void cmd_build(const Context& ctx, bool width_set, bool groups_set) {
  const Options& o = ctx.opts();
  ModelGraph g = build_arch(o, width_set, groups_set);
  if (!o.weights_manifest.empty()) import_weights(g, o.weights_manifest);
  const std::string path = o.output.empty() ? o.arch + ".edrm" : o.output;
  save_model(g, path);
  if (!o.export_dir.empty()) export_weights(g, o.export_dir);
  // Reload so the file is known to validate.
  const ModelGraph back = load_model(path);
  ctx.out() << kv_block({{"model", path},
                         {"arch", o.arch},
                         {"precision", std::string(precision_name(back.precision))},
                         {"nodes", std::to_string(back.nodes.size())},
                         {"parameters", std::to_string(back.parameter_count())},
                         {"file_bytes", std::to_string(serialized_size(back))}},
                        o.machine);
}

void cmd_quantize(const Context& ctx) {
  const Options& o = ctx.opts();
  const ModelGraph g = load_model(o.model);
  if (g.precision != Precision::kF32) throw ValidationError("model is already quantized");
  const std::vector<RgbImage> images = load_image_files(o.calib_dir, o.limit);
  if (images.empty()) {
    throw ValidationError("calibration directory '" + o.calib_dir + "' has no images");
  }
  std::vector<Tensor> samples;
  for (const RgbImage& im : images) samples.push_back(preprocess(im));
  const ModelGraph q = quantize_graph(g, calibrate(g, samples));
  std::string path = o.output;
  if (path.empty()) {
    std::filesystem::path p(o.model);
    path = (p.parent_path() / (p.stem().string() + ".i8.edrm")).string();
  }
  save_model(q, path);
  const QuantReport r = fidelity_report(g, q, samples);
  ctx.out() << kv_block({{"model", path},
                         {"samples", std::to_string(r.samples)},
                         {"agreement", fmt("%.6f", r.agreement)},
                         {"max_logit_error", fmt("%.9g", r.max_logit_error)},
                         {"max_unit_error", std::to_string(r.max_unit_error())},
                         {"f32_bytes", std::to_string(r.reference_bytes)},
                         {"i8_bytes", std::to_string(r.candidate_bytes)},
                         {"size_ratio", fmt("%.6f", static_cast<double>(r.candidate_bytes) /
                                                        static_cast<double>(r.reference_bytes))}},
                        o.machine);
}

void cmd_infer(const Context& ctx) {
  const Options& o = ctx.opts();
  const ModelGraph g = load_model(o.model);
  const Classification c = classify(g, preprocess(load_image(o.image)));
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("label", std::string(label_name(c.label)));
  for (const DRLabel l : all_labels()) {
    rows.emplace_back("p." + std::string(label_name(l)),
                      fmt("%.9g", c.probabilities[static_cast<std::size_t>(l)]));
  }
  ctx.emit(kv_block(rows, o.machine));
}

void cmd_evaluate(const Context& ctx) {
  const Options& o = ctx.opts();
  const ModelGraph g = load_model(o.model);
  const Dataset ds = load_dataset(o.dataset);
  for (const std::string& w : ds.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::vector<LabeledImage> chosen;
  if (o.subset == "all") {
    chosen = ds.images;
  } else {
    const DatasetSplit s = split(ds.images, o.seed, o.stratified);
    for (const std::size_t i : o.subset == "train" ? s.train : s.validation) {
      chosen.push_back(ds.images[i]);
    }
  }
  const ClassificationReport r = evaluate(g, chosen);
  ctx.emit(o.machine ? format_report_kv(r) : format_report_text(r));
}

void cmd_profile(const Context& ctx) {
  const Options& o = ctx.opts();
  if (!o.fit_anchors.empty()) {
    const std::map<std::string, std::int64_t> macs = {
        {"mobilenet", count_macs(build_mobilenet()).total},
        {"shufflenet", count_macs(build_shufflenet()).total},
        {"squeezenet", count_macs(build_squeezenet()).total},
        {"customdnn", count_macs(build_custom_dnn()).total}};
    ctx.emit(fit_report_profiles(load_anchors(o.fit_anchors), macs, "mobilenet"));
    return;
  }
  if (o.model.empty()) throw UsageError("profile needs a model path or --fit-anchors");
  const ModelGraph g = load_model(o.model);
  const std::vector<DeviceProfile> profiles = load_profiles(o.profiles);
  const MacReport macs = count_macs(g);
  const MemoryPlan plan = plan_memory(g);
  std::string s;
  if (o.machine) {
    s += "precision=" + std::string(precision_name(g.precision)) + "\n";
    s += "macs=" + std::to_string(macs.total) + "\n";
    s += "arena_bytes=" + std::to_string(plan.arena_bytes) + "\n";
    s += "rom_bytes=" + std::to_string(plan.rom_bytes) + "\n";
    for (const DeviceProfile& p : profiles) {
      s += "device=" + p.name + ";latency_ms=" +
           fmt("%.3f", estimate_latency(macs.total, p)) +
           ";arena_RAM=" + std::to_string(plan.arena_bytes) +
           ";ROM=" + std::to_string(plan.rom_bytes) + "\n";
    }
  } else {
    char line[160];
    std::snprintf(line, sizeof(line), "model %s (%s), %lld MACs\n\n", g.name.c_str(),
                  std::string(precision_name(g.precision)).c_str(),
                  static_cast<long long>(macs.total));
    s += line;
    std::snprintf(line, sizeof(line), "%-16s %14s %12s %12s\n", "device", "latency_ms",
                  "arena_RAM", "ROM");
    s += line;
    for (const DeviceProfile& p : profiles) {
      std::snprintf(line, sizeof(line), "%-16s %14.1f %12zu %12zu\n", p.name.c_str(),
                    estimate_latency(macs.total, p), plan.arena_bytes, plan.rom_bytes);
      s += line;
    }
  }
  ctx.emit(s);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"dredge: int8 inference engine and deployment profiler for "
               "retinopathy classifiers"};
  app.name("dredge");
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--output", o.output, "Output path");
  app.add_flag("--machine", o.machine, "key=value output");

  auto* build = app.add_subcommand("build", "Build an f32 model file");
  build->add_option("arch", o.arch, "mobilenet | shufflenet | squeezenet | customdnn")
      ->required();
  auto* width = build->add_option("--width", o.width, "Width multiplier");
  auto* groups = build->add_option("--groups", o.groups, "ShuffleNet groups");
  build->add_option("--weights", o.weights_manifest, "Raw-tensor manifest to import");
  build->add_option("--export-weights", o.export_dir, "Directory for a raw-tensor export");

  auto* quant = app.add_subcommand("quantize", "Convert an f32 model to int8");
  quant->add_option("model", o.model, "f32 model file")->required();
  quant->add_option("calib_dir", o.calib_dir, "Calibration image directory")->required();
  quant->add_option("--limit", o.limit, "Maximum calibration images")->capture_default_str();

  auto* infer = app.add_subcommand("infer", "Classify one image");
  infer->add_option("model", o.model)->required();
  infer->add_option("image", o.image)->required();

  auto* eval = app.add_subcommand("evaluate", "Evaluate on a labeled dataset");
  eval->add_option("model", o.model)->required();
  eval->add_option("dataset", o.dataset)->required();
  eval->add_option("--subset", o.subset, "all | train | validation")
      ->check(CLI::IsMember({"all", "train", "validation"}))
      ->capture_default_str();
  eval->add_flag("--stratified", o.stratified, "Split each class separately");

  auto* prof = app.add_subcommand("profile", "Latency, RAM and ROM per device class");
  prof->add_option("model", o.model);
  prof->add_option("--profiles", o.profiles, "Device profile file")->capture_default_str();
  prof->add_option("--fit-anchors", o.fit_anchors,
                   "Fit profiles from an anchor file instead of profiling a model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Context ctx(o, out);
  try {
    if (*build) {
      cmd_build(ctx, width->count() > 0, groups->count() > 0);
    } else if (*quant) {
      cmd_quantize(ctx);
    } else if (*infer) {
      cmd_infer(ctx);
    } else if (*eval) {
      cmd_evaluate(ctx);
    } else if (*prof) {
      cmd_profile(ctx);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kUsage: return kExitUsage;
      case ErrorKind::kIo: return kExitIo;
      case ErrorKind::kFormat: return kExitFormat;
      case ErrorKind::kValidation: return kExitValidation;
    }
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace dredge::cli
