"""Test package for homfilter"""
