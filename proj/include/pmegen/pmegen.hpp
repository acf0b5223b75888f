#pragma once

#include "pmegen/binding.hpp"
#include "pmegen/blockarith.hpp"
#include "pmegen/engine.hpp"
#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/knowledge.hpp"
#include "pmegen/matrix.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/oracle.hpp"
#include "pmegen/partition.hpp"
#include "pmegen/prover.hpp"
#include "pmegen/render.hpp"
#include "pmegen/size.hpp"
