#include "tapml/faults.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "tapml/float16.hpp"
#include "tapml/kernels.hpp"

namespace tapml {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 7> kModeNames = {
    "ResultPlusOne",     "FastMathTanhNaN", "PackedU32Dequant", "WrongGeluConstant",
    "Fp16Accumulate",    "UnalignedGatherOffByOne", "DropLastColumn"};

}  // namespace

const char* fault_mode_name(FaultMode mode) {
  return kModeNames[static_cast<size_t>(mode)];
}

FaultMode fault_mode_from_name(const std::string& name) {
  for (size_t i = 0; i < kModeNames.size(); ++i)
    if (name == kModeNames[i]) return static_cast<FaultMode>(i);
  throw Error(errc::parse_error, "unknown fault mode '" + name + "'");
}

std::set<OpKind> FaultSet::enabled_kinds() const {
  std::set<OpKind> kinds;
  for (const FaultSpec& f : faults)
    if (f.enabled) kinds.insert(f.target_kind);
  return kinds;
}

bool FaultSet::empty() const { return enabled_kinds().empty(); }

FaultSet load_faults(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::parse_error, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, path.string() + ": " + e.what());
  }
  FaultSet set;
  const json* arr = &j;
  if (j.is_object()) {
    set.provenance = j.value("provenance", "");
    arr = &j.at("faults");
  }
  std::set<std::string> ids;
  try {
    for (const json& jf : *arr) {
      FaultSpec f;
      f.id = jf.at("id").get<std::string>();
      f.target_kind = op_kind_from_name(jf.at("kind").get<std::string>());
      f.mode = fault_mode_from_name(jf.at("mode").get<std::string>());
      if (jf.contains("params") && jf["params"].is_object()) {
        const json& p = jf["params"];
        if (p.contains("threshold")) f.param = p["threshold"].get<double>();
        if (p.contains("value")) f.param = p["value"].get<double>();
      }
      f.enabled = jf.value("enabled", true);
      if (!ids.insert(f.id).second)
        throw Error(errc::parse_error, "duplicate fault id '" + f.id + "'");
      set.faults.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, path.string() + ": " + e.what());
  }
  return set;
}

void save_faults(const FaultSet& set, const std::filesystem::path& path) {
  json arr = json::array();
  for (const FaultSpec& f : set.faults) {
    json params = json::object();
    if (f.mode == FaultMode::FastMathTanhNaN) params["threshold"] = f.param;
    if (f.mode == FaultMode::WrongGeluConstant) params["value"] = f.param;
    arr.push_back({{"id", f.id},
                   {"kind", op_kind_name(f.target_kind)},
                   {"mode", fault_mode_name(f.mode)},
                   {"params", params},
                   {"enabled", f.enabled}});
  }
  json j = {{"provenance", set.provenance}, {"faults", arr}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(errc::parse_error, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

namespace {

void apply_fault(const FaultSpec& fault, const KernelHandle& handle,
                 const std::vector<Tensor>& inputs, std::vector<Tensor>& outputs) {
  Tensor& out = outputs[0];
  const size_t n = out.numel();
  switch (fault.mode) {
    case FaultMode::ResultPlusOne:
      for (size_t i = 0; i < n; ++i) out.set(i, out.get(i) + 1.0);
      break;

    case FaultMode::FastMathTanhNaN: {
      const double threshold = fault.param;
      for (size_t i = 0; i < n; ++i)
        if (std::fabs(inputs[0].get(i)) > threshold)
          out.set(i, std::numeric_limits<double>::quiet_NaN());
      break;
    }

    case FaultMode::PackedU32Dequant: {
      // uint8x4 read as one little-endian uint32 before dequantization:
      // every lane of an aligned 4-byte group gets the u32 value.
      const std::vector<uint8_t>& raw = inputs[0].bytes();
      for (size_t base = 0; base + 4 <= raw.size(); base += 4) {
        uint32_t packed;
        std::memcpy(&packed, raw.data() + base, 4);
        for (size_t lane = 0; lane < 4; ++lane)
          out.set(base + lane, static_cast<double>(packed));
      }
      break;
    }

    case FaultMode::WrongGeluConstant: {
      // recompute with the corrupted cubic coefficient
      const double wrong = fault.param;
      const double sqrt_2_over_pi = std::sqrt(2.0 / 3.14159265358979323846);
      for (size_t i = 0; i < n; ++i) {
        const double x = inputs[0].get(i);
        const double inner = sqrt_2_over_pi * (x + wrong * x * x * x);
        out.set(i, 0.5 * x * (1.0 + std::tanh(inner)));
      }
      break;
    }

    case FaultMode::Fp16Accumulate: {
      if (handle.kind != OpKind::MatMul) break;
      const int64_t m = inputs[0].shape()[0];
      const int64_t k = inputs[0].shape()[1];
      const int64_t p = inputs[1].shape()[1];
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < p; ++j) {
          double acc = 0.0;
          for (int64_t kk = 0; kk < k; ++kk)
            acc = fp16::round_f64(
                acc + fp16::round_f64(inputs[0].get(i * k + kk) * inputs[1].get(kk * p + j)));
          out.set(static_cast<size_t>(i * p + j), acc);
        }
      break;
    }

    case FaultMode::UnalignedGatherOffByOne: {
      if (handle.kind != OpKind::Embedding) break;
      const int64_t rows = inputs[0].shape()[0];
      const int64_t dim = inputs[0].shape()[1];
      const size_t row_bytes = static_cast<size_t>(dim) * dtype_width(inputs[0].dtype());
      const int64_t count = inputs[1].shape()[0];
      for (int64_t i = 0; i < count; ++i) {
        const int64_t id = inputs[1].get_int(static_cast<size_t>(i));
        if ((static_cast<size_t>(id) * row_bytes) % 16 == 0) continue;
        const int64_t bad = (id + 1) % rows;  // missing unaligned-access check
        std::memcpy(out.bytes().data() + static_cast<size_t>(i) * row_bytes,
                    inputs[0].bytes().data() + static_cast<size_t>(bad) * row_bytes,
                    row_bytes);
      }
      break;
    }

    case FaultMode::DropLastColumn: {
      if (out.shape().empty()) break;
      const int64_t width = out.shape().back();
      if (width == 0) break;
      for (size_t i = static_cast<size_t>(width) - 1; i < n; i += width) out.set(i, 0.0);
      break;
    }
  }
}

class FaultyBackend final : public Backend {
 public:
  FaultyBackend(Backend& inner, FaultSet set) : inner_(inner), set_(std::move(set)) {
    for (size_t a = 0; a < set_.faults.size(); ++a)
      for (size_t b = a + 1; b < set_.faults.size(); ++b)
        if (set_.faults[a].target_kind == set_.faults[b].target_kind &&
            set_.faults[a].mode == set_.faults[b].mode)
          throw Error(errc::unknown_kind,
                      "duplicate fault for kind " +
                          std::string(op_kind_name(set_.faults[a].target_kind)));
  }

  std::string name() const override { return inner_.name(); }
  DeviceProfile profile() const override { return inner_.profile(); }

  KernelHandle compile(OpKind kind, const Attrs& attrs,
                       const std::vector<TensorSig>& input_sig) override {
    return inner_.compile(kind, attrs, input_sig);
  }

  std::vector<Tensor> run(const KernelHandle& handle,
                          const std::vector<Tensor>& inputs) override {
    std::vector<Tensor> outputs = inner_.run(handle, inputs);
    for (const FaultSpec& fault : set_.faults)  // application order = list order
      if (fault.enabled && fault.target_kind == handle.kind)
        apply_fault(fault, handle, inputs, outputs);
    return outputs;
  }

 private:
  Backend& inner_;
  FaultSet set_;
};

}  // namespace

std::unique_ptr<Backend> wrap_with_faults(Backend& inner, const FaultSet& set) {
  return std::make_unique<FaultyBackend>(inner, set);
}

}  // namespace tapml
