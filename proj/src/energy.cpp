// Copyright 2026 The rnsim Authors.
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

#include "rnsim/energy.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "rnsim/csv.hpp"

namespace rnsim {
namespace {

void CheckEnob(int enob) {
  if (enob < 1 || enob > 64) {
    throw Error(ErrorCode::kInvalidArgument,
                "ENOB must lie in [1, 64], got " + std::to_string(enob));
  }
}

}  // namespace

void ConverterParams::Validate() const {
  for (double v : {cu, vdd, k1, k2}) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "converter parameters must be finite and positive");
    }
  }
}

double DacEnergy(int enob, const ConverterParams& params) {
  CheckEnob(enob);
  params.Validate();
  return double(enob) * double(enob) * params.cu * params.vdd * params.vdd;
}

double AdcEnergy(int enob, const ConverterParams& params) {
  CheckEnob(enob);
  params.Validate();
  return params.k1 * enob + params.k2 * std::ldexp(1.0, 2 * enob);
}

EnergyRow DotEnergyReport(const DotShape& shape, const ConverterParams& params,
                          bool weight_stationary) {
  if (shape.n_moduli == 0) {
    throw Error(ErrorCode::kInvalidArgument, "at least one modulus required");
  }
  const double copies = double(shape.n_moduli);
  const double dacs = double(shape.h) * (weight_stationary ? 1.0 : 2.0);
  EnergyRow row;
  row.kind = shape.kind;
  row.b_dac = shape.b_dac;
  row.b_adc = shape.b_adc;
  row.n_moduli = shape.n_moduli;
  row.h = shape.h;
  row.dac_energy = copies * dacs * DacEnergy(shape.b_dac, params);
  row.adc_energy = copies * AdcEnergy(shape.b_adc, params);
  row.total = row.dac_energy + row.adc_energy;
  return row;
}

EnergyRow DotEnergyReport(const CoreConfig& cfg, const ConverterParams& params,
                          bool weight_stationary) {
  DotShape shape{cfg.kind(), cfg.b_dac(), cfg.b_adc(),
                 cfg.moduli() ? cfg.moduli()->size() : 1, cfg.h()};
  return DotEnergyReport(shape, params, weight_stationary);
}

std::vector<EnergyRow> PresetEnergyTable(std::size_t h,
                                         const ConverterParams& params,
                                         bool weight_stationary) {
  std::vector<EnergyRow> rows;
  for (int b = 4; b <= 8; ++b) {
    for (CoreKind kind : {CoreKind::kLp, CoreKind::kHp, CoreKind::kRns}) {
      rows.push_back(
          DotEnergyReport(CoreConfig::Make(kind, b, h), params, weight_stationary));
    }
  }
  return rows;
}

void WriteEnergyCsv(std::ostream& os, std::span<const EnergyRow> rows) {
  os << "kind,b_dac,b_adc,nModuli,dacEnergyJ,adcEnergyJ,totalJ\n";
  for (const auto& r : rows) {
    os << CoreKindName(r.kind) << ',' << r.b_dac << ',' << r.b_adc << ','
       << r.n_moduli << ',' << FormatDouble(r.dac_energy) << ','
       << FormatDouble(r.adc_energy) << ',' << FormatDouble(r.total) << '\n';
  }
}

void WriteEnergyTable(std::ostream& os, std::span<const EnergyRow> rows) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-4s %5s %5s %3s %14s %14s %14s\n", "core",
                "b_dac", "b_adc", "n", "DAC [fJ]", "ADC [fJ]", "total [fJ]");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-4s %5d %5d %3zu %14.4g %14.4g %14.4g\n",
                  std::string(CoreKindName(r.kind)).c_str(), r.b_dac, r.b_adc,
                  r.n_moduli, r.dac_energy * 1e15, r.adc_energy * 1e15,
                  r.total * 1e15);
    os << line;
  }
}

}  // namespace rnsim
