// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/cli.hpp"

int main(int argc, char** argv) { return ressel::cli::run(argc, argv); }
