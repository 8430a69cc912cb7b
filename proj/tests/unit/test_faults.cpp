#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tapml/faults.hpp"
#include "tapml/kernels.hpp"

using namespace tapml;

namespace {

Tensor make_f(DType dtype, Shape shape, std::initializer_list<double> vals) {
  Tensor t(dtype, std::move(shape));
  size_t i = 0;
  for (double v : vals) t.set(i++, v);
  REQUIRE(i == t.numel());
  return t;
}

std::vector<Tensor> run_on(Backend& b, OpKind kind, const Attrs& attrs,
                           const std::vector<Tensor>& inputs) {
  std::vector<TensorSig> sigs;
  for (const Tensor& t : inputs) sigs.push_back({t.dtype(), t.shape()});
  return b.run(b.compile(kind, attrs, sigs), inputs);
}

FaultSet one_fault(OpKind kind, FaultMode mode, double param = 0.0) {
  FaultSet set;
  set.faults.push_back({"f0", kind, mode, param, true});
  return set;
}

}  // namespace

TEST_CASE("fault mode names round-trip") {
  for (int i = 0; i < 7; ++i) {
    const FaultMode m = static_cast<FaultMode>(i);
    CHECK(fault_mode_from_name(fault_mode_name(m)) == m);
  }
  CHECK_THROWS_AS(fault_mode_from_name("CosmicRay"), Error);
}

TEST_CASE("ResultPlusOne shifts every element of the targeted kind only") {
  auto golden = make_golden_backend();
  auto faulty = wrap_with_faults(*golden, one_fault(OpKind::Add, FaultMode::ResultPlusOne));
  Tensor a = make_f(DType::F32, {2}, {1.0, -3.0});
  auto out = run_on(*faulty, OpKind::Add, {}, {a, a});
  CHECK(out[0].get(0) == 3.0);   // 2 + 1
  CHECK(out[0].get(1) == -5.0);  // -6 + 1
  auto untouched = run_on(*faulty, OpKind::Mul, {}, {a, a});
  CHECK(untouched[0].get(0) == 1.0);  // other kinds pass through
}

TEST_CASE("the half-precision subtraction bug: 1035 - 1031 returns 5") {
  auto golden = make_golden_backend();
  Tensor a = make_f(DType::F16, {1}, {1035.0});
  Tensor b = make_f(DType::F16, {1}, {1031.0});
  CHECK(run_on(*golden, OpKind::Sub, {}, {a, b})[0].get(0) == 4.0);

  auto native = make_sim_native_backend();
  CHECK(run_on(*native, OpKind::Sub, {}, {a, b})[0].get(0) == 4.0);

  auto faulty = wrap_with_faults(*native, one_fault(OpKind::Sub, FaultMode::ResultPlusOne));
  CHECK(run_on(*faulty, OpKind::Sub, {}, {a, b})[0].get(0) == 5.0);
}

TEST_CASE("FastMathTanhNaN poisons outputs only above its threshold") {
  auto golden = make_golden_backend();
  auto faulty =
      wrap_with_faults(*golden, one_fault(OpKind::GeluTanh, FaultMode::FastMathTanhNaN, 45.0));
  Tensor x = make_f(DType::F32, {3}, {1.0, 46.0, -47.0});
  auto out = run_on(*faulty, OpKind::GeluTanh, {}, {x});
  CHECK(!std::isnan(out[0].get(0)));
  CHECK(std::isnan(out[0].get(1)));
  CHECK(std::isnan(out[0].get(2)));  // magnitude check, sign-agnostic
  Tensor small = make_f(DType::F32, {2}, {0.3, -0.9});
  auto clean = run_on(*faulty, OpKind::GeluTanh, {}, {small});
  CHECK(!std::isnan(clean[0].get(0)));
  CHECK(!std::isnan(clean[0].get(1)));
}

TEST_CASE("PackedU32Dequant reads uint8x4 as one little-endian uint32") {
  auto golden = make_golden_backend();
  auto faulty =
      wrap_with_faults(*golden, one_fault(OpKind::DequantizeU8, FaultMode::PackedU32Dequant));
  Tensor q(DType::U8, {4});
  q.set_int(0, 1);
  q.set_int(1, 2);
  q.set_int(2, 0);
  q.set_int(3, 0);
  Attrs attrs = {{"scale", 1.0}, {"zero_point", int64_t{0}}, {"group", int64_t{4}},
                 {"out_dtype", std::string("f64")}};
  auto out = run_on(*faulty, OpKind::DequantizeU8, attrs, {q});
  const double packed = 1.0 + 2.0 * 256.0;  // 0x00000201
  for (size_t i = 0; i < 4; ++i) CHECK(out[0].get(i) == packed);
}

TEST_CASE("WrongGeluConstant diverges from the correct activation away from zero") {
  auto golden = make_golden_backend();
  auto faulty = wrap_with_faults(
      *golden, one_fault(OpKind::GeluTanh, FaultMode::WrongGeluConstant, 0.44715));
  Tensor x = make_f(DType::F64, {2}, {0.0, 1.5});
  auto good = run_on(*golden, OpKind::GeluTanh, {}, {x});
  auto bad = run_on(*faulty, OpKind::GeluTanh, {}, {x});
  CHECK(bad[0].get(0) == good[0].get(0));  // both exactly zero at 0
  CHECK(std::fabs(bad[0].get(1) - good[0].get(1)) > 0.01);
}

TEST_CASE("Fp16Accumulate degrades matmul accumulation on a F32 kernel") {
  auto golden = make_golden_backend();
  auto faulty = wrap_with_faults(*golden, one_fault(OpKind::MatMul, FaultMode::Fp16Accumulate));
  // f32 carries 1024 + 0.25 exactly; binary16 accumulation drops the 0.25
  Tensor a = make_f(DType::F32, {1, 2}, {1024.0, 0.25});
  Tensor b = make_f(DType::F32, {2, 1}, {1.0, 1.0});
  CHECK(run_on(*golden, OpKind::MatMul, {}, {a, b})[0].get(0) == 1024.25);
  CHECK(run_on(*faulty, OpKind::MatMul, {}, {a, b})[0].get(0) == 1024.0);
  // non-MatMul kinds are untouched even if targeted
  auto relu_faulty =
      wrap_with_faults(*golden, one_fault(OpKind::Relu, FaultMode::Fp16Accumulate));
  Tensor x = make_f(DType::F32, {1}, {2.5});
  CHECK(run_on(*relu_faulty, OpKind::Relu, {}, {x})[0].get(0) == 2.5);
}

TEST_CASE("UnalignedGatherOffByOne corrupts rows whose byte offset is not 16-aligned") {
  auto golden = make_golden_backend();
  auto faulty = wrap_with_faults(
      *golden, one_fault(OpKind::Embedding, FaultMode::UnalignedGatherOffByOne));
  // rows of 3 f32 = 12 bytes: row 0 offset 0 (aligned), row 1 offset 12 (not)
  Tensor table = make_f(DType::F32, {4, 3}, {0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3});
  Tensor ids(DType::I32, {2});
  ids.set_int(0, 0);
  ids.set_int(1, 1);
  auto out = run_on(*faulty, OpKind::Embedding, {}, {table, ids});
  CHECK(out[0].get(0) == 0.0);  // aligned row gathered correctly
  CHECK(out[0].get(3) == 2.0);  // unaligned row fetched one past the requested id
  // with 4-float rows (16-byte aligned), the fault is invisible
  Tensor table16 = make_f(DType::F32, {2, 4}, {0, 0, 0, 0, 1, 1, 1, 1});
  auto ok = run_on(*faulty, OpKind::Embedding, {}, {table16, ids});
  CHECK(ok[0].get(4) == 1.0);
}

TEST_CASE("DropLastColumn zeroes the last element along the last axis") {
  auto golden = make_golden_backend();
  auto faulty = wrap_with_faults(*golden, one_fault(OpKind::Relu, FaultMode::DropLastColumn));
  Tensor x = make_f(DType::F32, {2, 3}, {1, 2, 3, 4, 5, 6});
  auto out = run_on(*faulty, OpKind::Relu, {}, {x});
  CHECK(out[0].get(0) == 1.0);
  CHECK(out[0].get(2) == 0.0);
  CHECK(out[0].get(5) == 0.0);
  CHECK(out[0].get(4) == 5.0);
}

TEST_CASE("disabled faults pass through; duplicate (kind, mode) pairs are rejected") {
  auto golden = make_golden_backend();
  FaultSet disabled = one_fault(OpKind::Add, FaultMode::ResultPlusOne);
  disabled.faults[0].enabled = false;
  CHECK(disabled.empty());
  auto wrapped = wrap_with_faults(*golden, disabled);
  Tensor a = make_f(DType::F32, {1}, {1.0});
  CHECK(run_on(*wrapped, OpKind::Add, {}, {a, a})[0].get(0) == 2.0);

  FaultSet dup = one_fault(OpKind::Add, FaultMode::ResultPlusOne);
  dup.faults.push_back({"f1", OpKind::Add, FaultMode::ResultPlusOne, 0.0, true});
  CHECK_THROWS_AS(wrap_with_faults(*golden, dup), Error);
}

TEST_CASE("fault sets round-trip through faults.json in both accepted layouts") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "tapml-test-faults.json";

  FaultSet set;
  set.provenance = "unit";
  set.faults.push_back({"tanh-nan", OpKind::GeluTanh, FaultMode::FastMathTanhNaN, 45.0, true});
  set.faults.push_back({"sub-off", OpKind::Sub, FaultMode::ResultPlusOne, 0.0, false});
  save_faults(set, path);

  const FaultSet loaded = load_faults(path);
  CHECK(loaded.provenance == "unit");
  REQUIRE(loaded.faults.size() == 2);
  CHECK(loaded.faults[0].id == "tanh-nan");
  CHECK(loaded.faults[0].target_kind == OpKind::GeluTanh);
  CHECK(loaded.faults[0].mode == FaultMode::FastMathTanhNaN);
  CHECK(loaded.faults[0].param == 45.0);
  CHECK(loaded.faults[1].enabled == false);
  CHECK(loaded.enabled_kinds() == std::set<OpKind>{OpKind::GeluTanh});

  // bare-array layout
  std::ofstream(path, std::ios::trunc)
      << R"([{"id":"p1","kind":"Mul","mode":"ResultPlusOne"}])";
  const FaultSet bare = load_faults(path);
  REQUIRE(bare.faults.size() == 1);
  CHECK(bare.faults[0].target_kind == OpKind::Mul);
  CHECK(bare.faults[0].enabled);

  std::ofstream(path, std::ios::trunc) << R"([{"id":"a"},{"id":"a"}])";
  CHECK_THROWS_AS(load_faults(path), Error);
  fs::remove(path);
}
