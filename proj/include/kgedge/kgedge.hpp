// Copyright 2026 The kgedge Authors.
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

// Everything except the HTTP binding (kgedge/http.hpp).

#ifndef KGEDGE_KGEDGE_HPP_
#define KGEDGE_KGEDGE_HPP_

#include "kgedge/checkpoint.hpp"
#include "kgedge/common.hpp"
#include "kgedge/evaluator.hpp"
#include "kgedge/models.hpp"
#include "kgedge/pdqa.hpp"
#include "kgedge/pruner.hpp"
#include "kgedge/runtime.hpp"
#include "kgedge/synth_graph.hpp"
#include "kgedge/trainer.hpp"
#include "kgedge/triple_store.hpp"

#endif  // KGEDGE_KGEDGE_HPP_
