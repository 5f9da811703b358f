"""Competing sellers with lottery menus."""
