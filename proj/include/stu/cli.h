// Copyright 2026 The STU Authors. All Rights Reserved.
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

// Command-line front end. The `stu` binary is a thin wrapper around
// run_command so that tests can drive every subcommand in-process.

#ifndef STU_CLI_H_
#define STU_CLI_H_

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stu/training.h"

namespace stu {

// Spearman rank correlation; tied values receive their average rank.
double Spearman(std::span<const double> a, std::span<const double> b);

// "epoch,train_loss,cv_loss,lr,seconds" followed by one row per record.
std::string FormatMetricsCsv(const std::vector<EpochRecord>& history);

// args excludes the program name. Errors are reported on `err` as a single
// line "error: <kind>: <message>"; the return value is the exit status.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace stu

#endif  // STU_CLI_H_
