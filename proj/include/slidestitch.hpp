/*
 * Copyright 2026 The slidestitch Authors
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

#pragma once

#include "slidestitch/compositor.hpp"
#include "slidestitch/core.hpp"
#include "slidestitch/corners.hpp"
#include "slidestitch/csv_io.hpp"
#include "slidestitch/graph.hpp"
#include "slidestitch/image_ops.hpp"
#include "slidestitch/laplacian_solver.hpp"
#include "slidestitch/log.hpp"
#include "slidestitch/lucas_kanade.hpp"
#include "slidestitch/metrics.hpp"
#include "slidestitch/morphology.hpp"
#include "slidestitch/pairwise.hpp"
#include "slidestitch/parallel.hpp"
#include "slidestitch/pipeline.hpp"
#include "slidestitch/png_io.hpp"
#include "slidestitch/pyramid.hpp"
#include "slidestitch/simulator.hpp"
#include "slidestitch/template_match.hpp"
#include "slidestitch/texture.hpp"
