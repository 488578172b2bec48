// Copyright 2026 The HIER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Trains the pipeline on a small synthetic intent task and prints test metrics.

#include <chrono>
#include <iostream>

#include "hier/hier.hpp"

int main() {
  hier::Config config;
  config.d = 16;
  config.k = 8;
  config.l = 4;
  config.epochs = 10;
  config.synthetic_noise = 0.1;

  const auto data = hier::load_data(config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto trained = hier::train(config, data.train, data.validation, [](const hier::EpochRecord& r) {
    std::cout << hier::to_json(r).dump() << '\n';
  });
  const auto metrics = hier::evaluate(trained.checkpoint, data.test);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "best epoch " << trained.best_epoch << ", test " << hier::to_json(metrics).dump() << " in " << secs
            << " s\n";
}
