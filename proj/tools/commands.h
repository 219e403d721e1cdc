/*
 * Copyright 2026 The avel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AVEL_TOOLS_COMMANDS_H_
#define AVEL_TOOLS_COMMANDS_H_

#include <cstdint>
#include <string>

#include "CLI11.hpp"

namespace avel::cli {

// Registers synth, zeroshot, train, infer and eval on `app`. Each command
// runs from its subcommand callback and throws on runtime failure.
void add_commands(CLI::App& app);

}  // namespace avel::cli

#endif  // AVEL_TOOLS_COMMANDS_H_
