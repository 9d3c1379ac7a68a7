/*
 * Copyright 2026 The Melody Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Umbrella header.

#pragma once

#include "melody/clustering.hpp"
#include "melody/cost.hpp"
#include "melody/engine.hpp"
#include "melody/error.hpp"
#include "melody/ingest.hpp"
#include "melody/io.hpp"
#include "melody/knee.hpp"
#include "melody/lsh.hpp"
#include "melody/matrix.hpp"
#include "melody/pipeline.hpp"
#include "melody/planted.hpp"
#include "melody/spectral.hpp"
#include "melody/summary.hpp"
