// Copyright 2026 The p2pfl Authors
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

#include "p2pfl/config.hpp"
#include "p2pfl/dataset.hpp"
#include "p2pfl/errors.hpp"
#include "p2pfl/federation.hpp"
#include "p2pfl/harness.hpp"
#include "p2pfl/learner.hpp"
#include "p2pfl/net_graph.hpp"
#include "p2pfl/param_vector.hpp"
#include "p2pfl/privacy.hpp"
#include "p2pfl/seed.hpp"
