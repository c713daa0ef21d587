// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/intnet.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <variant>
#include <vector>

#include "intnet/calibration.hpp"
#include "intnet/compare.hpp"
#include "intnet/float_engine.hpp"
#include "intnet/int_engine.hpp"
#include "intnet/model_io.hpp"
#include "intnet/pipeline.hpp"
#include "intnet/quantizer.hpp"
#include "intnet/synth.hpp"

using intnet::TensorF;
using intnet::TensorI32;
using intnet::TensorI8;
using intnet::TensorU8;

using AnyTensor = std::variant<TensorF, TensorI8, TensorI32, TensorU8>;

struct intnet_tensor {
  AnyTensor t;
};
struct intnet_float_model {
  intnet::NetworkIR net;
};
struct intnet_int_model {
  intnet::IntegerModel model;
};
struct intnet_calibration {
  intnet::CalibrationResult calib;
};
struct intnet_conversion {
  intnet::ConversionResult result;
  intnet::PipelineConfig cfg;
};

namespace {

thread_local std::string last_error;

intnet_status fail(intnet_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <typename F>
intnet_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return INTNET_OK;
  } catch (const intnet::Error& e) {
    return fail(static_cast<intnet_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(INTNET_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(INTNET_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw intnet::invalid_argument(what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

const TensorU8& as_u8(const intnet_tensor* t) {
  require(t != nullptr, "null tensor");
  const auto* u = std::get_if<TensorU8>(&t->t);
  if (!u) throw intnet::invalid_argument("expected a uint8 tensor");
  return *u;
}

std::vector<TensorU8> u8_list(const intnet_tensor* const* items, std::size_t count) {
  require(items != nullptr || count == 0, "null tensor list");
  std::vector<TensorU8> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(as_u8(items[i]));
  return out;
}

// Single images split out of CHW or NCHW tensors.
std::vector<TensorU8> images_of(const intnet_tensor* const* items, std::size_t count) {
  std::vector<TensorU8> out;
  for (auto& t : u8_list(items, count)) {
    if (t.rank() != 4) {
      out.push_back(std::move(t));
      continue;
    }
    for (std::int64_t n = 0; n < t.dim(0); ++n) out.push_back(intnet::slice_batch(t, n));
  }
  return out;
}

std::vector<TensorF> float_batches(const intnet::NetworkIR& net, const intnet_tensor* const* items,
                                   std::size_t count) {
  std::vector<TensorF> out;
  for (const auto& t : u8_list(items, count))
    out.push_back(intnet::renormalize_input_float(t, net.input_ratio));
  return out;
}

intnet::ExecOptions exec_of(const intnet_exec_options* o) {
  intnet::ExecOptions e;
  if (o) {
    require(o->threads >= 1, "threads must be at least 1");
    e.threads = o->threads;
    e.schedule_seed = o->schedule_seed;
  }
  return e;
}

intnet_payload payload_of(const intnet::PayloadStats& s) {
  return {s.total, s.weight_bytes, s.bias_bytes, s.metadata()};
}

void copy_dims(const intnet::Shape& s, int64_t chw[3]) {
  for (int i = 0; i < 3; ++i) chw[i] = i < static_cast<int>(s.size()) ? s[i] : 0;
}

template <typename T>
intnet_tensor* wrap(intnet::Tensor<T> t) {
  return new intnet_tensor{AnyTensor(std::move(t))};
}

}  // namespace

extern "C" {

const char* intnet_version(void) { return "0.1.0"; }

const char* intnet_last_error(void) { return last_error.c_str(); }

const char* intnet_status_name(intnet_status status) {
  switch (status) {
    case INTNET_OK: return "ok";
    case INTNET_ERR_INVALID_ARGUMENT: return "invalid argument";
    case INTNET_ERR_IO: return "io error";
    case INTNET_ERR_PARSE: return "parse error";
    case INTNET_ERR_VALIDATION: return "validation error";
    case INTNET_ERR_SHAPE: return "shape error";
    case INTNET_ERR_CALIBRATION: return "calibration error";
    case INTNET_ERR_QUANTIZATION: return "quantization error";
    case INTNET_ERR_THRESHOLD: return "threshold not met";
    case INTNET_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void intnet_string_free(char* s) { std::free(s); }

// ---- tensors ----

intnet_status intnet_tensor_create(intnet_elem_kind kind, int rank, const int64_t* dims,
                                   const void* data, intnet_tensor** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    require(rank >= 0 && rank <= 8 && (dims != nullptr || rank == 0), "bad rank or dims");
    const intnet::Shape shape(dims, dims + rank);
    auto make = [&]<typename T>(T) {
      intnet::Tensor<T> t(shape);
      if (data) std::memcpy(t.data().data(), data, t.size() * sizeof(T));
      *out = wrap(std::move(t));
    };
    switch (kind) {
      case INTNET_F32: make(float{}); break;
      case INTNET_I8: make(std::int8_t{}); break;
      case INTNET_I32: make(std::int32_t{}); break;
      case INTNET_U8: make(std::uint8_t{}); break;
      default: throw intnet::invalid_argument("unknown element kind");
    }
  });
}

intnet_status intnet_tensor_load(const char* path, intnet_tensor** out) {
  return guarded([&] {
    require(path && out, "null argument");
    switch (intnet::tensor_file_kind(path)) {
      case intnet::ElemKind::kF32: *out = wrap(intnet::load_tensor<float>(path)); break;
      case intnet::ElemKind::kI8: *out = wrap(intnet::load_tensor<std::int8_t>(path)); break;
      case intnet::ElemKind::kI32: *out = wrap(intnet::load_tensor<std::int32_t>(path)); break;
      case intnet::ElemKind::kU8: *out = wrap(intnet::load_tensor<std::uint8_t>(path)); break;
    }
  });
}

intnet_status intnet_tensor_save(const intnet_tensor* t, const char* path) {
  return guarded([&] {
    require(t && path, "null argument");
    std::visit([&](const auto& x) { intnet::save_tensor(path, x); }, t->t);
  });
}

intnet_status intnet_tensor_stack(const intnet_tensor* const* items, size_t count,
                                  intnet_tensor** out) {
  return guarded([&] {
    require(items && out && count > 0, "stack needs at least one tensor");
    for (size_t i = 0; i < count; ++i) require(items[i] != nullptr, "null tensor");
    std::visit(
        [&]<typename T>(const intnet::Tensor<T>&) {
          std::vector<intnet::Tensor<T>> parts;
          for (size_t i = 0; i < count; ++i) {
            const auto* p = std::get_if<intnet::Tensor<T>>(&items[i]->t);
            if (!p) throw intnet::invalid_argument("stacked tensors differ in element kind");
            parts.push_back(*p);
          }
          *out = wrap(intnet::stack_batch<T>(parts));
        },
        items[0]->t);
  });
}

intnet_status intnet_tensor_slice(const intnet_tensor* t, int64_t index, intnet_tensor** out) {
  return guarded([&] {
    require(t && out, "null argument");
    std::visit([&](const auto& x) { *out = wrap(intnet::slice_batch(x, index)); }, t->t);
  });
}

void intnet_tensor_free(intnet_tensor* t) { delete t; }

intnet_elem_kind intnet_tensor_kind(const intnet_tensor* t) {
  return static_cast<intnet_elem_kind>(
      std::visit([](const auto& x) { return static_cast<int>(x.kind); }, t->t));
}

int intnet_tensor_rank(const intnet_tensor* t) {
  return std::visit([](const auto& x) { return static_cast<int>(x.rank()); }, t->t);
}

int64_t intnet_tensor_dim(const intnet_tensor* t, int axis) {
  return std::visit(
      [&](const auto& x) -> int64_t {
        return axis >= 0 && static_cast<std::size_t>(axis) < x.rank() ? x.dim(axis) : 0;
      },
      t->t);
}

size_t intnet_tensor_size(const intnet_tensor* t) {
  return std::visit([](const auto& x) { return x.size(); }, t->t);
}

const void* intnet_tensor_data(const intnet_tensor* t) {
  return std::visit([](const auto& x) -> const void* { return x.data().data(); }, t->t);
}

int intnet_tensor_equal(const intnet_tensor* a, const intnet_tensor* b) {
  return a && b && a->t == b->t ? 1 : 0;
}

// ---- models ----

intnet_status intnet_model_file_kind(const char* path, intnet_model_kind* out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = intnet::model_file_kind(path) == intnet::ModelKind::kInt ? INTNET_MODEL_INT
                                                                    : INTNET_MODEL_FLOAT;
  });
}

intnet_status intnet_float_model_load(const char* path, intnet_float_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new intnet_float_model{intnet::load_model(path)};
  });
}

intnet_status intnet_float_model_save(const intnet_float_model* m, const char* path) {
  return guarded([&] {
    require(m && path, "null argument");
    intnet::save_model(m->net, path);
  });
}

void intnet_float_model_free(intnet_float_model* m) { delete m; }

void intnet_float_model_input(const intnet_float_model* m, int64_t chw[3]) {
  copy_dims(m->net.input, chw);
}

double intnet_float_model_input_ratio(const intnet_float_model* m) {
  return intnet::to_double(m->net.input_ratio);
}

intnet_status intnet_float_model_payload(const intnet_float_model* m, intnet_payload* out) {
  return guarded([&] {
    require(m && out, "null argument");
    *out = payload_of(intnet::payload_stats(m->net));
  });
}

intnet_status intnet_int_model_load(const char* path, intnet_int_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new intnet_int_model{intnet::load_integer_model(path)};
  });
}

intnet_status intnet_int_model_save(const intnet_int_model* m, const char* path) {
  return guarded([&] {
    require(m && path, "null argument");
    intnet::save_model(m->model, path);
  });
}

void intnet_int_model_free(intnet_int_model* m) { delete m; }

void intnet_int_model_input(const intnet_int_model* m, int64_t chw[3]) {
  copy_dims(m->model.input, chw);
}

double intnet_int_model_output_ratio(const intnet_int_model* m) {
  return intnet::to_double(m->model.output_ratio);
}

int intnet_int_model_max_int(const intnet_int_model* m) { return m->model.max_int; }

intnet_status intnet_int_model_payload(const intnet_int_model* m, intnet_payload* out) {
  return guarded([&] {
    require(m && out, "null argument");
    *out = payload_of(intnet::payload_stats(m->model));
  });
}

intnet_status intnet_synth_model(const char* topology, uint64_t seed, int64_t size, int batch_norm,
                                 intnet_float_model** out) {
  return guarded([&] {
    require(topology && out, "null argument");
    const std::string kind = topology;
    const bool bn = batch_norm != 0;
    intnet::NetworkIR net;
    if (kind == "vrcnn")
      net = intnet::make_vrcnn(seed, size > 0 ? size : 64, bn);
    else if (kind == "linear")
      net = intnet::make_linear(seed, {1, 8, 8, 1}, size > 0 ? size : 16, bn);
    else if (kind == "residual")
      net = intnet::make_residual(seed, 8, size > 0 ? size : 16, batch_norm != 0);
    else
      throw intnet::invalid_argument("unknown topology '" + kind + "'");
    *out = new intnet_float_model{std::move(net)};
  });
}

intnet_status intnet_random_images(uint64_t seed, size_t count, const int64_t chw[3],
                                   intnet_tensor** out) {
  return guarded([&] {
    require(chw && out && count > 0, "bad image request");
    const auto imgs = intnet::random_images(seed, count, {chw[0], chw[1], chw[2]});
    *out = wrap(intnet::stack_batch<std::uint8_t>(imgs));
  });
}

// ---- calibration ----

intnet_status intnet_calibrate_nsigma(const intnet_float_model* m,
                                      const intnet_tensor* const* batches, size_t count, double n,
                                      intnet_calibration** out) {
  return guarded([&] {
    require(m && out, "null argument");
    const auto fb = float_batches(m->net, batches, count);
    *out = new intnet_calibration{intnet::calibrate_nsigma(m->net, fb, n)};
  });
}

intnet_status intnet_calibrate_geometric(const intnet_float_model* m, double a0, double an,
                                         intnet_calibration** out) {
  return guarded([&] {
    require(m && out, "null argument");
    *out = new intnet_calibration{intnet::calibrate_geometric(m->net, a0, an)};
  });
}

intnet_status intnet_scan_output_range(const intnet_float_model* m,
                                       const intnet_tensor* const* batches, size_t count,
                                       double* out) {
  return guarded([&] {
    require(m && out, "null argument");
    *out = intnet::scan_output_range(m->net, float_batches(m->net, batches, count));
  });
}

intnet_status intnet_calibration_load(const char* path, intnet_calibration** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new intnet_calibration{intnet::load_calibration(path)};
  });
}

intnet_status intnet_calibration_save(const intnet_calibration* c, const char* path) {
  return guarded([&] {
    require(c && path, "null argument");
    intnet::save_calibration(c->calib, path);
  });
}

intnet_status intnet_calibration_report(const intnet_calibration* c, char** out) {
  return guarded([&] {
    require(c && out, "null argument");
    *out = dup_string(intnet::format_calibration(c->calib));
  });
}

intnet_status intnet_calibration_bound(const intnet_calibration* c, const char* layer,
                                       double* out) {
  return guarded([&] {
    require(c && layer && out, "null argument");
    *out = c->calib.h_rf(layer);
  });
}

void intnet_calibration_free(intnet_calibration* c) { delete c; }

// ---- conversion ----

void intnet_convert_options_init(intnet_convert_options* opts) {
  const intnet::PipelineConfig d;
  *opts = intnet_convert_options{d.bits, d.n, d.n_step, d.n_cap, -1, 0.0, nullptr, 0};
}

intnet_status intnet_convert(const intnet_float_model* m, const intnet_calibration* c,
                             const intnet_convert_options* opts, intnet_conversion** out) {
  return guarded([&] {
    require(m && c && out, "null argument");
    intnet_convert_options o;
    intnet_convert_options_init(&o);
    if (opts) o = *opts;
    intnet::PipelineConfig cfg;
    cfg.bits = o.bits;
    cfg.n = c->calib.method == intnet::CalibrationMethod::kNSigma ? c->calib.n : o.n;
    cfg.n_step = o.n_step;
    cfg.n_cap = o.n_cap;
    if (o.per_channel >= 0) cfg.per_channel = o.per_channel != 0;
    if (o.target_psnr > 0) {
      auto images = std::make_shared<std::vector<TensorU8>>(images_of(o.images, o.image_count));
      require(!images->empty(), "a PSNR target needs images");
      if (c->calib.method == intnet::CalibrationMethod::kNSigma) {
        auto batches = std::make_shared<std::vector<TensorF>>(
            float_batches(m->net, o.images, o.image_count));
        cfg.recalibrate = [batches](const intnet::NetworkIR& net, double n) {
          return intnet::calibrate_nsigma(net, *batches, n);
        };
      }
      cfg.metric = [images](const intnet::ConversionResult& r) {
        return intnet::compare_models(r.float_net, r.model, *images, intnet::CompareMode::kRegress)
            .psnr;
      };
      cfg.baseline = o.target_psnr;
    }
    auto result = intnet::convert_network(m->net, c->calib, cfg);
    *out = new intnet_conversion{std::move(result), std::move(cfg)};
  });
}

intnet_status intnet_conversion_int_model(const intnet_conversion* r, intnet_int_model** out) {
  return guarded([&] {
    require(r && out, "null argument");
    *out = new intnet_int_model{r->result.model};
  });
}

intnet_status intnet_conversion_float_model(const intnet_conversion* r, intnet_float_model** out) {
  return guarded([&] {
    require(r && out, "null argument");
    *out = new intnet_float_model{r->result.float_net};
  });
}

intnet_status intnet_conversion_report(const intnet_conversion* r, char** out) {
  return guarded([&] {
    require(r && out, "null argument");
    *out = dup_string(intnet::conversion_report(r->result, r->cfg));
  });
}

int intnet_conversion_threshold_met(const intnet_conversion* r) {
  return r->result.threshold_met ? 1 : 0;
}

double intnet_conversion_n_used(const intnet_conversion* r) { return r->result.n_used; }

void intnet_conversion_free(intnet_conversion* r) { delete r; }

// ---- inference ----

void intnet_exec_options_init(intnet_exec_options* opts) { *opts = intnet_exec_options{1, 0}; }

intnet_status intnet_forward_float(const intnet_float_model* m, const intnet_tensor* raw,
                                   intnet_tensor** out) {
  return guarded([&] {
    require(m && out, "null argument");
    const auto x = intnet::renormalize_input_float(as_u8(raw), m->net.input_ratio);
    *out = wrap(intnet::forward_f32(m->net, x).output);
  });
}

intnet_status intnet_forward_int(const intnet_int_model* m, const intnet_tensor* raw,
                                 const intnet_exec_options* opts, intnet_tensor** out) {
  return guarded([&] {
    require(m && out, "null argument");
    *out = wrap(intnet::forward_int(m->model, as_u8(raw), exec_of(opts)).output);
  });
}

intnet_status intnet_trace_int(const intnet_int_model* m, const intnet_tensor* raw,
                               const intnet_exec_options* opts, const char* dir) {
  return guarded([&] {
    require(m && dir, "null argument");
    const auto res = intnet::forward_int(m->model, as_u8(raw), exec_of(opts), true);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw intnet::io_error("cannot create '" + std::string(dir) + "': " + ec.message());
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03zu", i);
      const auto path =
          (std::filesystem::path(dir) / (std::string(idx) + "_" + res.trace[i].layer + ".tensor"))
              .string();
      std::visit([&](const auto& t) { intnet::save_tensor(path, t); }, res.trace[i].values);
    }
  });
}

intnet_status intnet_dequantize(const intnet_int_model* m, const intnet_tensor* values,
                                intnet_tensor** out) {
  return guarded([&] {
    require(m && values && out, "null argument");
    const auto* v = std::get_if<TensorI32>(&values->t);
    if (!v) throw intnet::invalid_argument("expected an int32 tensor");
    *out = wrap(intnet::dequantize(*v, m->model.output_ratio));
  });
}

intnet_status intnet_compare(const intnet_float_model* f, const intnet_int_model* q,
                             const intnet_tensor* const* images, size_t count,
                             intnet_compare_mode mode, const intnet_exec_options* opts,
                             intnet_comparison* out) {
  return guarded([&] {
    require(f && q && out, "null argument");
    const auto imgs = images_of(images, count);
    const auto c = intnet::compare_models(
        f->net, q->model, imgs,
        mode == INTNET_REGRESS ? intnet::CompareMode::kRegress : intnet::CompareMode::kClassify,
        exec_of(opts));
    *out = intnet_comparison{c.count, c.max_abs, c.mean_abs, c.mse, c.peak, c.psnr};
  });
}

}  // extern "C"
