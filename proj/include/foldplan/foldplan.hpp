#pragma once

#include "foldplan/errors.hpp"
#include "foldplan/random.hpp"
#include "foldplan/geometry.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/trajectory.hpp"
#include "foldplan/pathgen.hpp"
#include "foldplan/resolver.hpp"
#include "foldplan/postprocess.hpp"
#include "foldplan/io.hpp"
#include "foldplan/campaign.hpp"
