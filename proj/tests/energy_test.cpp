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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace rnsim {
namespace {

constexpr double kFj = 1e-15;

TEST(DacEnergyTest, Examples) {
  EXPECT_NEAR(DacEnergy(4), 8 * kFj, 1e-30);
  EXPECT_NEAR(DacEnergy(1), 0.5 * kFj, 1e-30);
  EXPECT_NEAR(DacEnergy(8), 32 * kFj, 1e-30);
  ConverterParams p;
  p.vdd = 2.0;
  EXPECT_NEAR(DacEnergy(4, p), 32 * kFj, 1e-30);
}

TEST(AdcEnergyTest, Examples) {
  EXPECT_NEAR(AdcEnergy(6), 600 * kFj + 4096e-18, 1e-27);
  EXPECT_NEAR(AdcEnergy(6), 604.1 * kFj, 0.01 * kFj);
  EXPECT_NEAR(AdcEnergy(22), 2.2e-12 + std::pow(4.0, 22) * 1e-18, 1e-20);
  EXPECT_NEAR(AdcEnergy(22), 1.759e-5, 0.001e-5);
  EXPECT_NEAR(AdcEnergy(1), 100.004 * kFj, 1e-27);
}

TEST(EnergyTest, Rejections) {
  EXPECT_THROW(DacEnergy(0), Error);
  EXPECT_THROW(AdcEnergy(-3), Error);
  ConverterParams bad;
  bad.k2 = 0.0;
  EXPECT_THROW(AdcEnergy(4, bad), Error);
  bad = {};
  bad.cu = -1;
  EXPECT_THROW(DacEnergy(4, bad), Error);
}

TEST(EnergyTest, StrictlyIncreasing) {
  for (int b = 1; b < 40; ++b) {
    EXPECT_LT(DacEnergy(b), DacEnergy(b + 1));
    EXPECT_LT(AdcEnergy(b), AdcEnergy(b + 1));
  }
}

TEST(EnergyTest, AdcGrowthApproachesFour) {
  double prev_gap = 4.0;
  for (int b = 8; b <= 30; ++b) {
    const double ratio = AdcEnergy(b + 1) / AdcEnergy(b);
    const double gap = std::fabs(ratio - 4.0);
    EXPECT_LT(gap, prev_gap) << b;
    prev_gap = gap;
  }
  EXPECT_NEAR(AdcEnergy(31) / AdcEnergy(30), 4.0, 1e-6);
}

TEST(DotEnergyTest, HpVersusRns) {
  ConverterParams p;
  const EnergyRow hp = DotEnergyReport(CoreConfig::Hp(8, 128), p, false);
  const EnergyRow rns = DotEnergyReport(CoreConfig::Rns("rns8", 128), p, false);
  EXPECT_EQ(hp.b_adc, 22);
  EXPECT_EQ(rns.n_moduli, 3u);
  EXPECT_NEAR(rns.adc_energy, 3 * AdcEnergy(8), 1e-27);
  EXPECT_GE(hp.adc_energy / rns.adc_energy, 1e6);
  EXPECT_NEAR(AdcEnergy(22) / (3 * AdcEnergy(8)), 6.8e6, 0.05e6);
}

TEST(DotEnergyTest, LinearInModuli) {
  ConverterParams p;
  for (int b = 4; b <= 8; ++b) {
    const EnergyRow lp = DotEnergyReport(CoreConfig::Lp(b, 128), p, false);
    const CoreConfig rc = CoreConfig::Rns("rns" + std::to_string(b), 128);
    const EnergyRow rns = DotEnergyReport(rc, p, false);
    EXPECT_DOUBLE_EQ(rns.total, double(rc.moduli()->size()) * lp.total);
  }
}

TEST(DotEnergyTest, ConversionCounts) {
  ConverterParams p;
  DotShape s{CoreKind::kLp, 6, 6, 1, 128};
  const EnergyRow moving = DotEnergyReport(s, p, false);
  const EnergyRow stationary = DotEnergyReport(s, p, true);
  EXPECT_DOUBLE_EQ(moving.dac_energy, 256 * DacEnergy(6));
  EXPECT_DOUBLE_EQ(stationary.dac_energy, 128 * DacEnergy(6));
  EXPECT_DOUBLE_EQ(moving.adc_energy, AdcEnergy(6));
  EXPECT_EQ(moving.total, moving.dac_energy + moving.adc_energy);

  s.h = 0;
  const EnergyRow empty = DotEnergyReport(s, p, false);
  EXPECT_EQ(empty.dac_energy, 0.0);
  EXPECT_EQ(empty.adc_energy, AdcEnergy(6));
}

TEST(DotEnergyTest, UnitRoundTrip) {
  for (int b = 1; b <= 24; ++b) {
    const double j = AdcEnergy(b);
    EXPECT_DOUBLE_EQ((j * 1e15) / 1e15, j);
  }
}

TEST(DotEnergyTest, PresetTableCsv) {
  auto rows = PresetEnergyTable(128, {}, false);
  ASSERT_EQ(rows.size(), 15u);
  std::ostringstream os;
  WriteEnergyCsv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "kind,b_dac,b_adc,nModuli,dacEnergyJ,adcEnergyJ,totalJ");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 10), "LP,4,4,1,2");
  std::ostringstream table;
  WriteEnergyTable(table, rows);
  EXPECT_NE(table.str().find("RNS"), std::string::npos);
}

}  // namespace
}  // namespace rnsim
