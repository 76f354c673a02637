// Copyright 2026 The RepBNN Authors. All Rights Reserved.
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

#include "repbnn/cli.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "repbnn/builders.h"
#include "repbnn/cost_model.h"
#include "repbnn/dataset.h"
#include "repbnn/error.h"
#include "repbnn/graph.h"
#include "repbnn/reptran.h"
#include "repbnn/trainer.h"

namespace repbnn {

namespace {

// Raised for flag values CLI11 accepted syntactically but we cannot use.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<Dims> parse_dims(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
      return std::nullopt;
    }
    v.push_back(std::stoul(part));
  }
  if (v.size() != 4 || v[0] == 0 || v[1] == 0 || v[2] == 0 || v[3] == 0) return std::nullopt;
  return Dims{v[0], v[1], v[2], v[3]};
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorCode::kIoError, "write to '" + path + "' failed");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct BuildArgs {
  std::string arch;
  bool binary = false;
  std::string shortcut = "zero-pad";
  std::string out;
};

struct TransformArgs {
  std::string in;
  std::size_t beta = 2;
  std::string last_layer = "take-all";
  std::string bn_position = "after";
  std::string out;
};

struct AnalyzeArgs {
  std::string in;
  std::string input_dims;
  std::string format = "table";
  bool with_bn = false;
};

struct VerifyArgs {
  std::string before;
  std::string after;
};

struct TrainArgs {
  std::string in;
  std::string dataset = "blobs";
  std::size_t classes = 0;
  TrainConfig cfg;
  bool deterministic = false;
  std::size_t threads = 0;
  std::string weights_out;
  std::string metrics;
};

struct DumpArgs {
  std::string in;
  std::string weights;
  std::string layer;
  std::string image;
  std::string out;
};

void cmd_build(const BuildArgs& a, std::ostream& out) {
  Graph g;
  if (a.arch == "resnet20") {
    g = build_resnet20(a.binary, a.shortcut == "pool-conv" ? ResNetShortcut::kPoolConv
                                                           : ResNetShortcut::kZeroPad);
  } else if (a.arch == "reactnet-a") {
    g = build_reactnet_a();
  } else {
    ToyNetOptions o;
    o.binary = a.binary;
    g = build_toy_net(o);
  }
  write_text(a.out, emit_model(g), out);
}

void cmd_transform(const TransformArgs& a, std::ostream& out) {
  RepTranConfig cfg;
  cfg.beta = a.beta;
  cfg.last_layer = *parse_last_layer_policy(a.last_layer);
  cfg.bn_position = *parse_bn_position(a.bn_position);
  write_text(a.out, emit_model(reptran(load_model(a.in), cfg)), out);
}

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::optional<Dims> dims;
  if (!a.input_dims.empty()) {
    dims = parse_dims(a.input_dims);
    if (!dims) throw UsageError("--input-dims expects N,C,H,W with positive integers");
  }
  const CostReport r = count(load_model(a.in), dims);
  out << (a.format == "tsv" ? render_tsv(r, a.with_bn) : render_table(r, a.with_bn));
}

void cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const Graph before = load_model(a.before);
  const Graph after = load_model(a.after);
  RepTranConfig cfg;
  cfg.beta = after.beta;
  for (const auto& check : verify_transform(before, after, cfg).checks) {
    out << "ok\t" << check << '\n';
  }
}

void cmd_train(TrainArgs a, std::ostream& out) {
  const Graph g = load_model(a.in);
  const Dims in = nominal_input_dims(g);
  std::size_t classes = a.classes;
  if (classes == 0) classes = infer_shapes(g).at(g.output_id()).sample_size();
  const Dataset data = load_dataset(a.dataset, in, classes, a.cfg.seed);
  a.cfg.threads = a.deterministic ? 1
                  : a.threads != 0 ? a.threads
                                   : std::max(1U, std::thread::hardware_concurrency());
  const TrainResult r = train(g, data, a.cfg);
  std::ostringstream log;
  for (const auto& m : r.history) {
    log << m.epoch << '\t' << fixed6(m.train_loss) << '\t' << fixed6(m.eval_acc) << '\n';
  }
  out << log.str();
  if (!a.metrics.empty()) write_text(a.metrics, log.str(), out);
  if (!a.weights_out.empty()) save_params(a.weights_out, r.params);
}

void cmd_dump(const DumpArgs& a, std::ostream& out) {
  const Graph g = load_model(a.in);
  const ParamStore params = load_params(a.weights);
  DenseTensor image = load_dense_blob(a.image);
  const Dims d = image.dims();
  for (const auto& path :
       dump_features(g, params, Activation{d, std::move(image).release()}, a.layer, a.out)) {
    out << path << '\n';
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Replicated binary network toolkit", "repbnn"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  BuildArgs build;
  auto* c_build = app.add_subcommand("build", "Emit a builder graph in the text model format");
  c_build->add_option("--arch", build.arch, "Architecture")
      ->required()
      ->check(CLI::IsMember({"resnet20", "reactnet-a", "toy"}));
  c_build->add_flag("--binary", build.binary,
                    "Binary variant (reactnet-a is always binary)");
  c_build->add_option("--shortcut", build.shortcut, "ResNet-20 downsampling bypass")
      ->check(CLI::IsMember({"zero-pad", "pool-conv"}));
  c_build->add_option("--out", build.out, "Output file (default stdout)");

  TransformArgs transform;
  auto* c_transform = app.add_subcommand("transform", "Apply RepTran to a graph");
  c_transform->add_option("--in", transform.in, "Input model")->required();
  c_transform->add_option("--beta", transform.beta, "Replication factor")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 16));
  c_transform->add_option("--last-layer", transform.last_layer, "Final FC policy")
      ->check(CLI::IsMember({"take-all", "take-1-over-beta", "take-1-over-beta2"}));
  c_transform->add_option("--bn-position", transform.bn_position, "BatchNorm placement")
      ->check(CLI::IsMember({"after", "before"}));
  c_transform->add_option("--out", transform.out, "Output file (default stdout)");

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Count FLOPs, BOPs and OPs");
  c_analyze->add_option("--in", analyze.in, "Input model")->required();
  c_analyze->add_option("--input-dims", analyze.input_dims, "N,C,H,W (default: model input)");
  c_analyze->add_option("--format", analyze.format, "Output format")
      ->check(CLI::IsMember({"table", "tsv"}));
  c_analyze->add_flag("--with-bn", analyze.with_bn, "Include BatchNorm in total OPs");

  VerifyArgs verify;
  auto* c_verify = app.add_subcommand("verify", "Check a RepTran result against its source");
  c_verify->add_option("--before", verify.before, "Baseline model")->required();
  c_verify->add_option("--after", verify.after, "Transformed model")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a graph with the straight-through estimator");
  c_train->add_option("--in", tr.in, "Input model")->required();
  c_train->add_option("--dataset", tr.dataset, "Labelled-bytes file, or blobs[:N]");
  c_train->add_option("--classes", tr.classes, "Class count; 0 uses the model output width");
  c_train->add_option("--epochs", tr.cfg.epochs, "Epochs");
  c_train->add_option("--seed", tr.cfg.seed, "Seed for init, split and shuffling");
  c_train->add_flag("--deterministic", tr.deterministic, "Force single-threaded execution");
  c_train->add_option("--threads", tr.threads, "Worker threads; 0 uses every core");
  c_train->add_option("--batch-size", tr.cfg.batch_size, "Batch size")
      ->check(CLI::PositiveNumber);
  c_train->add_option("--lr", tr.cfg.learning_rate, "Learning rate");
  c_train->add_option("--momentum", tr.cfg.momentum, "SGD momentum");
  c_train->add_option("--weight-decay", tr.cfg.weight_decay, "Weight decay on conv/FC weights");
  c_train->add_option("--eval-split", tr.cfg.eval_split, "Held-out fraction")
      ->check(CLI::Range(0.0, 0.99));
  c_train->add_option("--bn-init-noise", tr.cfg.bn_init_noise, "Std-dev of BatchNorm gamma noise");
  c_train->add_option("--bn-momentum", tr.cfg.bn_momentum, "BatchNorm running-stat momentum")
      ->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--max-steps", tr.cfg.max_steps, "Stop after this many steps");
  c_train->add_option("--weights-out", tr.weights_out, "Checkpoint path");
  c_train->add_option("--metrics", tr.metrics, "Also write the metrics log here");

  DumpArgs dump;
  auto* c_dump = app.add_subcommand("dump-features", "Write a layer's replicated activations");
  c_dump->add_option("--in", dump.in, "Input model")->required();
  c_dump->add_option("--weights", dump.weights, "Checkpoint")->required();
  c_dump->add_option("--layer", dump.layer, "Conv layer id")->required();
  c_dump->add_option("--image", dump.image, "Input tensor blob")->required();
  c_dump->add_option("--out", dump.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << app.get_name() << ": " << e.what() << '\n';
    return 2;
  }

  try {
    if (c_build->parsed()) cmd_build(build, out);
    if (c_transform->parsed()) cmd_transform(transform, out);
    if (c_analyze->parsed()) cmd_analyze(analyze, out);
    if (c_verify->parsed()) cmd_verify(verify, out);
    if (c_train->parsed()) cmd_train(tr, out);
    if (c_dump->parsed()) cmd_dump(dump, out);
  } catch (const UsageError& e) {
    err << app.get_name() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << app.get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace repbnn
