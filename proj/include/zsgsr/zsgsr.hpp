// Copyright 2026 The zsgsr Authors.
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

#pragma once

#include "zsgsr/backends.hpp"
#include "zsgsr/commands.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/dataset_io.hpp"
#include "zsgsr/engine.hpp"
#include "zsgsr/error.hpp"
#include "zsgsr/evaluator.hpp"
#include "zsgsr/explainers.hpp"
#include "zsgsr/fixture_backend.hpp"
#include "zsgsr/http_backend.hpp"
#include "zsgsr/noun_recognizer.hpp"
#include "zsgsr/role_grounder.hpp"
#include "zsgsr/verb_recognizer.hpp"
