# -*- coding: utf-8 -*-
#
# Copyright (c) 2021 CS GROUP - France.
#
# This file is part of FlexMarket.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""
Logging and small parsing helpers

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging

from flexmarket.exceptions import ConfigurationError

DEV_LOG_FILE = "flexmarket_dev.log"


def _replace_handler(logger, handler):
    for old_handler in list(logger.handlers):
        logger.removeHandler(old_handler)
        old_handler.close()
    logger.addHandler(handler)


def build_logger(level, user_file_name=None):
    """
    Builds two loggers : a dev one as well as a user one.

    :param level: The desired level of logging for the dev log.
    If is logging.ERROR (default) then the logging is handled on the stream.
    Otherwise, it outputs in the flexmarket_dev.log file
    :type level: logging level
    :param user_file_name: [Optional] Redirect the user output to this file
    :type user_file_name: str
    :returns: The two logger objects
    """
    # Creating DEV logger
    dev_formatter = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    if level != logging.ERROR:
        dev_handler = logging.FileHandler(DEV_LOG_FILE)
    else:
        dev_handler = logging.StreamHandler()
    dev_handler.setFormatter(dev_formatter)

    dev_logger = logging.getLogger("dev_logger")
    dev_logger.setLevel(level)
    _replace_handler(dev_logger, dev_handler)

    # Creating User logger
    user_formatter = logging.Formatter("%(message)s")

    if user_file_name is not None:
        user_handler = logging.FileHandler(user_file_name)
    else:
        user_handler = logging.StreamHandler()
    user_handler.setFormatter(user_formatter)

    user_logger = logging.getLogger("user_logger")
    user_logger.setLevel(logging.INFO)
    _replace_handler(user_logger, user_handler)

    return dev_logger, user_logger


def verbosity_to_level(verbose):
    """
    Maps the count of -v flags to a dev log level

    :param verbose: None, or the number of -v flags
    :type verbose: int
    :returns: a logging level
    """
    if verbose is None:  # Default, errors on the stream
        return logging.ERROR
    if verbose == 1:
        return logging.WARNING
    if verbose == 2:
        return logging.INFO
    return logging.DEBUG


def parse_float(text):
    """
    Parses a float, "inf" and "-inf" included

    :param text: textual value
    :type text: str
    :return: the value
    :rtype: float
    :raises ConfigurationError: when the text is not a number
    """
    try:
        return float(text)
    except ValueError as error:
        raise ConfigurationError("Not a number: {}".format(text)) from error


def parse_bool(text):
    """
    Parses a boolean written as true/false, yes/no, on/off or 1/0

    :param text: textual value
    :type text: str
    :rtype: bool
    """
    value = text.strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ValueError("Not a boolean: {}".format(text))


def parse_list(text, cast=float):
    """
    Parses a comma separated list, ignoring brackets and blanks

    :param text: textual value, e.g. "0, 0.02, 0.04" or "[1,2]"
    :type text: str
    :param cast: conversion applied to each element
    :return: the parsed values
    :rtype: list
    """
    stripped = text.strip().strip("[]()")
    if not stripped:
        return []
    return [cast(elt.strip()) for elt in stripped.split(",") if elt.strip()]
