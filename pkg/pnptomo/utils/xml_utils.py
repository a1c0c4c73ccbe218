#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Copyright 2021 The pnptomo developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

This file contains a set of XML utility functions.
"""
from __future__ import absolute_import, division, print_function

import warnings

import numpy as np
from lxml import etree
from lxml.etree import _Element
from six import string_types
from typing import Optional, Union, List, Any

from pnptomo.utils.general_utils import change_object_type

parser = etree.XMLParser(remove_blank_text=True, encoding='utf-8')


def value_to_xml(elem, value):
    # type: (_Element, Any) -> None
    """Write a value as the text of an element, using full float precision.

    Vectors are written as ';'-separated lists and tagged with ``mapType="vector"``.
    """
    if isinstance(value, np.ndarray):
        value = np.atleast_1d(value).flatten()

    if isinstance(value, np.ndarray):
        if value.size == 1:
            elem.text = str('{:.17g}'.format(value[0]))
        else:
            elem.text = ';'.join([str('{:.17g}'.format(v)) for v in value[:]])
            elem.attrib.update({'mapType': 'vector'})
    elif isinstance(value, bool):
        elem.text = 'true' if value else 'false'
    elif isinstance(value, float):
        elem.text = str('{:.17g}'.format(value))
    else:
        elem.text = str(value)


def xml_safe_create_element(tree, xpath, value=None):
    # type: (etree._ElementTree, str, Optional[Any]) -> _Element
    """Create an element at the given XPath, creating all intermediate elements on the way.

    Only plain child steps are supported (``/root/a/b``), which is all the sidecar and export
    files of this package need.

    Parameters
    ----------
        tree : :obj:`etree._ElementTree`
            `etree._ElementTree` in which to create the element.

        xpath : str
            XPath to ensure.

        value : any, optional
            Optional value to write at the deepest node of the ensured XPath.

    Returns
    -------
        :obj:`etree._Element`
            The element at the deepest level of the XPath.
    """
    steps = [step for step in xpath.split('/') if step]
    elem = tree.getroot()
    if not steps or steps[0] != elem.tag:
        raise ValueError("Specified XPath is incompatible with the given XML tree: root tags don't "
                         "match")

    for tag in steps[1:]:
        child = elem.find(tag)
        if child is None:
            child = etree.SubElement(elem, tag)
        elem = child

    if value is not None:
        value_to_xml(elem, value)
    return elem


def parse_xml(xml):
    # type: (Union[str, etree._ElementTree]) -> etree._ElementTree
    """Parse a path into an element tree, or pass an existing tree through."""
    if isinstance(xml, string_types):
        return etree.parse(xml, parser)
    return xml


def get_setting_safe(elem, setting, default, expected_type='str', warn=True):
    # type: (_Element, str, Any, str, bool) -> Any
    """Read a setting from a sub-element (or attribute when ``setting`` starts with '@').

    Missing settings fall back to the given default, with a warning.

    Parameters
    ----------
        elem : _Element
            The lxml element holding the settings.

        setting : str
            Relative path of the setting, or '@name' for an attribute.

        default : Any
            The default value of the setting if it is not found in the element.

        expected_type : str
            The expected type of the setting (str, int, float, bool).

        warn : bool
            Set to False to fall back to the default silently.

    Returns
    -------
        Union[str, int, float, bool]
            The setting that was found or its default value if it was not found.
    """
    if setting.startswith('@'):
        text = elem.get(setting[1:])
    else:
        found = elem.find(setting)
        text = found.text.strip() if isinstance(found, _Element) and found.text else None

    if text is None:
        if warn and default is not None:
            warnings.warn('Setting "{}" unspecified for element "{}", setting to default "{}".'
                          .format(setting, elem.tag, default))
        return default
    return change_object_type(text, expected_type)


def write_xml(tree, file_path):
    # type: (etree._ElementTree, str) -> None
    """Write an element tree to a file, pretty-printed with an XML declaration."""
    tree.write(file_path, encoding='utf-8', pretty_print=True, xml_declaration=True)


def children_of(elem):
    # type: (_Element) -> List[_Element]
    """Element children of an element, skipping comments and processing instructions."""
    return [child for child in elem if isinstance(child.tag, string_types)]
