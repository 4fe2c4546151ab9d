// SPDX-License-Identifier: Apache-2.0
//
// rssim - rate-splitting Massive MIMO downlink link-level simulator
// Copyright (C) 2026 The rssim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "rssim/errors.hpp"
#include "rssim/linalg.hpp"
#include "rssim/random.hpp"
#include "rssim/scenario.hpp"
#include "rssim/estimation.hpp"
#include "rssim/moments.hpp"
#include "rssim/precoders.hpp"
#include "rssim/link.hpp"
#include "rssim/power.hpp"
#include "rssim/experiment.hpp"
