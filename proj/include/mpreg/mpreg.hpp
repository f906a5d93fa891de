#pragma once

#include "mpreg/constraint.hpp"
#include "mpreg/elastic.hpp"
#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/image.hpp"
#include "mpreg/io.hpp"
#include "mpreg/krylov.hpp"
#include "mpreg/multigrid.hpp"
#include "mpreg/saddle.hpp"
#include "mpreg/schur.hpp"
#include "mpreg/sqp.hpp"
#include "mpreg/staggered.hpp"
#include "mpreg/synthetic.hpp"
