// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// intnet: calibrate, convert, infer, compare and bench on the command line.
// Only the C interface of libintnet is used here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "intnet/intnet.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitThreshold = 3;

struct Failure {
  int exit_code;
  std::string message;
};

void check(intnet_status s, const std::string& context) {
  if (s == INTNET_OK) return;
  const int code = s == INTNET_ERR_INVALID_ARGUMENT ? kExitUsage
                   : s == INTNET_ERR_THRESHOLD      ? kExitThreshold
                                                    : kExitInvalid;
  throw Failure{code, context + ": " + intnet_status_name(s) + ": " + intnet_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Tensor = std::unique_ptr<intnet_tensor, Deleter<intnet_tensor, intnet_tensor_free>>;
using FloatModel =
    std::unique_ptr<intnet_float_model, Deleter<intnet_float_model, intnet_float_model_free>>;
using IntModel = std::unique_ptr<intnet_int_model, Deleter<intnet_int_model, intnet_int_model_free>>;
using Calibration =
    std::unique_ptr<intnet_calibration, Deleter<intnet_calibration, intnet_calibration_free>>;
using Conversion =
    std::unique_ptr<intnet_conversion, Deleter<intnet_conversion, intnet_conversion_free>>;

std::string take_string(char* s) {
  std::string out(s);
  intnet_string_free(s);
  return out;
}

FloatModel load_float(const std::string& path) {
  intnet_float_model* m = nullptr;
  check(intnet_float_model_load(path.c_str(), &m), "loading " + path);
  return FloatModel(m);
}

IntModel load_int(const std::string& path) {
  intnet_int_model* m = nullptr;
  check(intnet_int_model_load(path.c_str(), &m), "loading " + path);
  return IntModel(m);
}

// Every *.tensor file of `dir` in name order, split into single images.
std::vector<Tensor> load_images(const std::string& dir) {
  if (dir.empty()) throw Failure{kExitUsage, "--data is required"};
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Failure{kExitInvalid, "data directory '" + dir + "' not found"};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tensor") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Tensor> images;
  for (const auto& f : files) {
    intnet_tensor* t = nullptr;
    check(intnet_tensor_load(f.string().c_str(), &t), "loading " + f.string());
    Tensor whole(t);
    if (intnet_tensor_kind(t) != INTNET_U8)
      throw Failure{kExitInvalid, f.string() + ": input images must be uint8"};
    if (intnet_tensor_rank(t) != 4) {
      images.push_back(std::move(whole));
      continue;
    }
    for (int64_t n = 0; n < intnet_tensor_dim(t, 0); ++n) {
      intnet_tensor* one = nullptr;
      check(intnet_tensor_slice(t, n, &one), "slicing " + f.string());
      images.emplace_back(one);
    }
  }
  if (images.empty()) throw Failure{kExitInvalid, "no .tensor images in '" + dir + "'"};
  return images;
}

void shuffle(std::vector<Tensor>& images, uint64_t seed) {
  if (seed == 0) return;
  std::mt19937_64 rng(seed);
  std::shuffle(images.begin(), images.end(), rng);
}

std::vector<Tensor> make_batches(const std::vector<Tensor>& images, std::size_t batch) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < images.size(); i += batch) {
    std::vector<const intnet_tensor*> part;
    for (std::size_t j = i; j < std::min(images.size(), i + batch); ++j) part.push_back(images[j].get());
    intnet_tensor* t = nullptr;
    check(intnet_tensor_stack(part.data(), part.size(), &t), "stacking batch");
    out.emplace_back(t);
  }
  return out;
}

std::vector<const intnet_tensor*> raw(const std::vector<Tensor>& v) {
  std::vector<const intnet_tensor*> out;
  for (const auto& t : v) out.push_back(t.get());
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Failure{kExitInvalid, "cannot write '" + path + "'"};
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw Failure{kExitInvalid, "failed writing '" + path + "'"};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Args {
  std::string model, int_model, data, method = "nsigma", out, out_float, calib, trace, mode = "regress";
  std::string topology = "vrcnn";
  double n = 3.0, n_step = 0.5, n_cap = 6.0, a0 = 0.5, an = 0.0;
  double min_psnr = 0.0, target_psnr = 0.0;
  int bits = 7, threads = 1, reps = 10, warmup = 2, count = 20;
  int64_t size = 0;
  std::size_t batch = 50;
  uint64_t seed = 0;
  bool bn = false;
};

intnet_exec_options exec(const Args& a) {
  intnet_exec_options o;
  intnet_exec_options_init(&o);
  o.threads = a.threads;
  o.schedule_seed = a.seed;
  return o;
}

int cmd_calibrate(const Args& a) {
  auto model = load_float(a.model);
  intnet_calibration* c = nullptr;
  if (a.method == "nsigma") {
    auto images = load_images(a.data);
    shuffle(images, a.seed);
    const auto batches = make_batches(images, a.batch);
    const auto ptrs = raw(batches);
    check(intnet_calibrate_nsigma(model.get(), ptrs.data(), ptrs.size(), a.n, &c), "calibrating");
  } else {
    double an = a.an;
    if (an <= 0) {
      const auto images = load_images(a.data);
      const auto batches = make_batches(images, a.batch);
      const auto ptrs = raw(batches);
      check(intnet_scan_output_range(model.get(), ptrs.data(), ptrs.size(), &an), "scanning output");
    }
    check(intnet_calibrate_geometric(model.get(), a.a0, an, &c), "calibrating");
  }
  Calibration calib(c);
  char* text = nullptr;
  check(intnet_calibration_report(c, &text), "formatting report");
  write_text(a.out, take_string(text));
  return kExitOk;
}

int cmd_convert(const Args& a) {
  if (a.calib.empty()) throw Failure{kExitUsage, "--calib is required"};
  if (a.out.empty()) throw Failure{kExitUsage, "--out is required"};
  auto model = load_float(a.model);
  intnet_calibration* c = nullptr;
  check(intnet_calibration_load(a.calib.c_str(), &c), "loading " + a.calib);
  Calibration calib(c);

  intnet_convert_options opts;
  intnet_convert_options_init(&opts);
  opts.bits = a.bits;
  opts.n = a.n;
  opts.n_step = a.n_step;
  opts.n_cap = a.n_cap;
  std::vector<Tensor> images;
  std::vector<const intnet_tensor*> ptrs;
  if (a.target_psnr > 0) {
    images = load_images(a.data);
    ptrs = raw(images);
    opts.target_psnr = a.target_psnr;
    opts.images = ptrs.data();
    opts.image_count = ptrs.size();
  }
  intnet_conversion* r = nullptr;
  check(intnet_convert(model.get(), c, &opts, &r), "converting");
  Conversion conv(r);

  intnet_int_model* q = nullptr;
  check(intnet_conversion_int_model(r, &q), "extracting integer model");
  IntModel qm(q);
  check(intnet_int_model_save(q, a.out.c_str()), "saving " + a.out);
  if (!a.out_float.empty()) {
    intnet_float_model* f = nullptr;
    check(intnet_conversion_float_model(r, &f), "extracting float model");
    FloatModel fm(f);
    check(intnet_float_model_save(f, a.out_float.c_str()), "saving " + a.out_float);
  }
  intnet_payload fp, ip;
  check(intnet_float_model_payload(model.get(), &fp), "measuring float payload");
  check(intnet_int_model_payload(q, &ip), "measuring integer payload");
  char* text = nullptr;
  check(intnet_conversion_report(r, &text), "formatting report");
  std::cout << take_string(text);
  std::cout << "float_weight_bytes " << fp.weight_bytes << "\n"
            << "int_weight_bytes " << ip.weight_bytes << "\n"
            << "int_total_bytes " << ip.total << "\n"
            << "int_metadata_bytes " << ip.metadata_bytes << "\n";
  return intnet_conversion_threshold_met(r) ? kExitOk : kExitThreshold;
}

int cmd_infer(const Args& a) {
  if (a.model.empty() == a.int_model.empty())
    throw Failure{kExitUsage, "give exactly one of --model and --int-model"};
  const auto images = load_images(a.data);
  if (!a.out.empty()) fs::create_directories(a.out);
  FloatModel fm;
  IntModel qm;
  if (a.model.empty())
    qm = load_int(a.int_model);
  else
    fm = load_float(a.model);
  const auto opts = exec(a);
  for (std::size_t i = 0; i < images.size(); ++i) {
    intnet_tensor* y = nullptr;
    if (fm) {
      check(intnet_forward_float(fm.get(), images[i].get(), &y), "float forward");
    } else {
      check(intnet_forward_int(qm.get(), images[i].get(), &opts, &y), "integer forward");
      if (a.mode == "regress") {
        intnet_tensor* d = nullptr;
        check(intnet_dequantize(qm.get(), y, &d), "dequantizing");
        intnet_tensor_free(y);
        y = d;
      }
      if (!a.trace.empty() && i == 0)
        check(intnet_trace_int(qm.get(), images[i].get(), &opts, a.trace.c_str()), "tracing");
    }
    Tensor out(y);
    char name[32];
    std::snprintf(name, sizeof(name), "out_%05zu.tensor", i);
    if (!a.out.empty())
      check(intnet_tensor_save(y, (fs::path(a.out) / name).string().c_str()), "saving output");
  }
  std::cout << "images " << images.size() << "\n";
  return kExitOk;
}

int cmd_compare(const Args& a) {
  auto fm = load_float(a.model);
  auto qm = load_int(a.int_model);
  const auto images = load_images(a.data);
  const auto ptrs = raw(images);
  const auto opts = exec(a);
  intnet_comparison c;
  check(intnet_compare(fm.get(), qm.get(), ptrs.data(), ptrs.size(),
                       a.mode == "regress" ? INTNET_REGRESS : INTNET_CLASSIFY, &opts, &c),
        "comparing");
  std::cout << "mode " << a.mode << "\n"
            << "images " << images.size() << "\n"
            << "values " << c.count << "\n"
            << "max_abs " << fmt(c.max_abs) << "\n"
            << "mean_abs " << fmt(c.mean_abs) << "\n"
            << "mse " << fmt(c.mse) << "\n"
            << "peak " << fmt(c.peak) << "\n"
            << "psnr " << (std::isinf(c.psnr) ? std::string("inf") : fmt(c.psnr)) << "\n";
  if (a.min_psnr > 0) {
    const bool ok = c.psnr >= a.min_psnr;
    std::cout << "min_psnr " << fmt(a.min_psnr) << "\n" << "pass " << (ok ? 1 : 0) << "\n";
    if (!ok) return kExitThreshold;
  }
  return kExitOk;
}

template <typename F>
void time_rows(const char* engine, int reps, int warmup, F&& run) {
  for (int i = 0; i < warmup; ++i) run();
  double total = 0, best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total += ms;
    best = std::min(best, ms);
  }
  std::cout << "engine " << engine << " reps=" << reps << " mean_ms=" << fmt(total / reps)
            << " min_ms=" << fmt(best) << "\n";
}

int cmd_bench(const Args& a) {
  if (a.model.empty() && a.int_model.empty())
    throw Failure{kExitUsage, "give --model and/or --int-model"};
  if (a.reps < 1 || a.warmup < 0) throw Failure{kExitUsage, "--reps must be >= 1"};
  FloatModel fm;
  IntModel qm;
  int64_t chw[3];
  if (!a.model.empty()) {
    fm = load_float(a.model);
    intnet_float_model_input(fm.get(), chw);
  }
  if (!a.int_model.empty()) {
    qm = load_int(a.int_model);
    intnet_int_model_input(qm.get(), chw);
  }
  intnet_tensor* x = nullptr;
  check(intnet_random_images(a.seed, 1, chw, &x), "making input");
  Tensor input(x);
  if (fm)
    time_rows("float", a.reps, a.warmup, [&] {
      intnet_tensor* y = nullptr;
      check(intnet_forward_float(fm.get(), x, &y), "float forward");
      intnet_tensor_free(y);
    });
  if (qm) {
    const auto opts = exec(a);
    Tensor first;
    bool identical = true;
    time_rows("int", a.reps, a.warmup, [&] {
      intnet_tensor* y = nullptr;
      check(intnet_forward_int(qm.get(), x, &opts, &y), "integer forward");
      if (!first)
        first.reset(y);
      else {
        identical = identical && intnet_tensor_equal(first.get(), y);
        intnet_tensor_free(y);
      }
    });
    std::cout << "int_outputs_identical " << (identical ? 1 : 0) << "\n";
  }
  return kExitOk;
}

int cmd_synth(const Args& a) {
  if (a.out.empty()) throw Failure{kExitUsage, "--out is required"};
  intnet_float_model* m = nullptr;
  check(intnet_synth_model(a.topology.c_str(), a.seed, a.size, a.bn ? 1 : 0, &m), "building model");
  FloatModel model(m);
  check(intnet_float_model_save(m, a.out.c_str()), "saving " + a.out);
  if (!a.data.empty()) {
    int64_t chw[3];
    intnet_float_model_input(m, chw);
    fs::create_directories(a.data);
    intnet_tensor* batch = nullptr;
    check(intnet_random_images(a.seed + 1, static_cast<std::size_t>(a.count), chw, &batch),
          "making images");
    Tensor all(batch);
    for (int i = 0; i < a.count; ++i) {
      intnet_tensor* one = nullptr;
      check(intnet_tensor_slice(batch, i, &one), "slicing");
      Tensor img(one);
      char name[32];
      std::snprintf(name, sizeof(name), "img_%05d.tensor", i);
      check(intnet_tensor_save(one, (fs::path(a.data) / name).string().c_str()), "saving image");
    }
  }
  std::cout << "model " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convert float CNNs to integer-only networks and run them."};
  app.require_subcommand(1);
  Args a;
  const auto bits = CLI::Range(4, 8);

  auto* calibrate = app.add_subcommand("calibrate", "Compute per-layer BReLU bounds");
  calibrate->add_option("--model", a.model, "Float model (.fnet)")->required();
  calibrate->add_option("--data", a.data, "Directory of uint8 .tensor images");
  calibrate->add_option("--method", a.method)->check(CLI::IsMember({"nsigma", "geometric"}));
  calibrate->add_option("--n", a.n, "n of the n-sigma rule")->check(CLI::PositiveNumber);
  calibrate->add_option("--batch", a.batch, "Images per calibration batch")->check(CLI::Range(1, 1 << 30));
  calibrate->add_option("--a0", a.a0, "Input range for the geometric method")->check(CLI::PositiveNumber);
  calibrate->add_option("--an", a.an, "Output range; scanned from --data when omitted");
  calibrate->add_option("--seed", a.seed, "Shuffle images before batching (0: keep order)");
  calibrate->add_option("--out", a.out, "Report path (stdout when omitted)");

  auto* convert = app.add_subcommand("convert", "Produce an integer model");
  convert->add_option("--model", a.model)->required();
  convert->add_option("--calib", a.calib, "Calibration report");
  convert->add_option("--bits", a.bits, "Activation bit depth")->check(bits);
  convert->add_option("--n", a.n)->check(CLI::PositiveNumber);
  convert->add_option("--n-step", a.n_step)->check(CLI::PositiveNumber);
  convert->add_option("--n-cap", a.n_cap)->check(CLI::PositiveNumber);
  convert->add_option("--data", a.data, "Images for --target-psnr");
  convert->add_option("--target-psnr", a.target_psnr, "Raise n until equivalence PSNR reaches this");
  convert->add_option("--out", a.out, "Integer model (.inet)");
  convert->add_option("--out-float", a.out_float, "Float model the integer model reproduces");

  auto* infer = app.add_subcommand("infer", "Run a model over a data directory");
  infer->add_option("--model", a.model);
  infer->add_option("--int-model", a.int_model);
  infer->add_option("--data", a.data)->required();
  infer->add_option("--mode", a.mode)->check(CLI::IsMember({"classify", "regress"}));
  infer->add_option("--threads", a.threads)->check(CLI::Range(1, 1024));
  infer->add_option("--seed", a.seed, "Tile schedule seed");
  infer->add_option("--trace", a.trace, "Write every layer output of the first image here");
  infer->add_option("--out", a.out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Float vs integer equivalence");
  compare->add_option("--model", a.model)->required();
  compare->add_option("--int-model", a.int_model)->required();
  compare->add_option("--data", a.data)->required();
  compare->add_option("--mode", a.mode)->check(CLI::IsMember({"classify", "regress"}));
  compare->add_option("--threads", a.threads)->check(CLI::Range(1, 1024));
  compare->add_option("--seed", a.seed);
  compare->add_option("--min-psnr", a.min_psnr, "Exit 3 when PSNR is below this");

  auto* bench = app.add_subcommand("bench", "Time forward passes");
  bench->add_option("--model", a.model);
  bench->add_option("--int-model", a.int_model);
  bench->add_option("--reps", a.reps);
  bench->add_option("--warmup", a.warmup);
  bench->add_option("--threads", a.threads)->check(CLI::Range(1, 1024));
  bench->add_option("--seed", a.seed, "Synthetic input seed");

  auto* synth = app.add_subcommand("synth", "Write a demo float model and random images");
  synth->add_option("--topology", a.topology)->check(CLI::IsMember({"vrcnn", "linear", "residual"}));
  synth->add_option("--seed", a.seed);
  synth->add_option("--size", a.size, "Input height and width");
  synth->add_flag("--bn", a.bn, "Add batch norm after each conv");
  synth->add_option("--out", a.out, "Float model (.fnet)");
  synth->add_option("--data", a.data, "Also write random images here");
  synth->add_option("--count", a.count)->check(CLI::Range(1, 1 << 20));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*calibrate) return cmd_calibrate(a);
    if (*convert) return cmd_convert(a);
    if (*infer) return cmd_infer(a);
    if (*compare) return cmd_compare(a);
    if (*bench) return cmd_bench(a);
    if (*synth) return cmd_synth(a);
  } catch (const Failure& f) {
    std::cerr << "intnet: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "intnet: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}
