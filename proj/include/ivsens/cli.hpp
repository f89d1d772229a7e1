// Copyright 2026 The ivsens Authors
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


#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ivsens::cli {

// Commands: estimate, sweep, simulate, replicate, rerun. `args` excludes the
// program name. Returns the process exit status:
//   0  success (including statistical failures reported in status fields)
//   1  data, configuration or estimation error; a JSON error record is
//      written to `err`
//   2  command-line usage error
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace ivsens::cli
