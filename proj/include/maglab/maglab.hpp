// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maglab/assembly.hpp"
#include "maglab/config.hpp"
#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/formulations.hpp"
#include "maglab/harness.hpp"
#include "maglab/io.hpp"
#include "maglab/limit.hpp"
#include "maglab/material.hpp"
#include "maglab/mesh.hpp"
#include "maglab/postprocess.hpp"
#include "maglab/solve.hpp"
#include "maglab/types.hpp"
