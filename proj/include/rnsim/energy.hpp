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

// Data-converter energy per dot product.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "rnsim/analog_core.hpp"

namespace rnsim {

struct ConverterParams {
  double cu = 0.5e-15;   // unit capacitance, F
  double vdd = 1.0;      // V
  double k1 = 100e-15;   // J per bit
  double k2 = 1e-18;     // J

  // Throws kInvalidArgument unless every field is finite and > 0.
  void Validate() const;
};

// ENOB^2 * Cu * Vdd^2.
double DacEnergy(int enob, const ConverterParams& params = {});
// k1 * ENOB + k2 * 4^ENOB.
double AdcEnergy(int enob, const ConverterParams& params = {});

struct EnergyRow {
  CoreKind kind = CoreKind::kLp;
  int b_dac = 0;
  int b_adc = 0;
  std::size_t n_moduli = 1;
  std::size_t h = 0;
  double dac_energy = 0.0;  // J
  double adc_energy = 0.0;  // J
  double total = 0.0;       // J
};

struct DotShape {
  CoreKind kind = CoreKind::kLp;
  int b_dac = 0;
  int b_adc = 0;
  std::size_t n_moduli = 1;
  std::size_t h = 0;
};

// One length-h dot product: h input DAC conversions, h weight conversions
// unless weights are stationary, one ADC conversion; every count is taken
// once per modulus on the RNS core.
EnergyRow DotEnergyReport(const DotShape& shape, const ConverterParams& params,
                          bool weight_stationary);
EnergyRow DotEnergyReport(const CoreConfig& cfg, const ConverterParams& params,
                          bool weight_stationary);

// LP, HP and RNS rows for each preset "rns4".."rns8" at tile size h.
std::vector<EnergyRow> PresetEnergyTable(std::size_t h,
                                         const ConverterParams& params,
                                         bool weight_stationary);

// Columns: kind,b_dac,b_adc,nModuli,dacEnergyJ,adcEnergyJ,totalJ
void WriteEnergyCsv(std::ostream& os, std::span<const EnergyRow> rows);
// Aligned text with energies in fJ.
void WriteEnergyTable(std::ostream& os, std::span<const EnergyRow> rows);

}  // namespace rnsim
