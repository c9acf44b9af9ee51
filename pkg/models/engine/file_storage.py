#!/usr/bin/python3
"""
Contains the FileStorage class
"""

import json
import logging
import os

from models.analysis import FixedPointReport
from models.env_bundle import EnvBundle

logger = logging.getLogger(__name__)

classes = {"EnvBundle": EnvBundle, "FixedPointReport": FixedPointReport}


class FileStorage:
    """serializes records to a JSON file & deserializes back to instances"""

    def __init__(self, file_path="file.json"):
        """binds the storage to one JSON file"""
        # string - path to the JSON file
        self.__file_path = file_path
        # dictionary - stores all objects by <class name>.id
        self.__objects = {}

    @property
    def file_path(self):
        """path of the backing JSON file"""
        return self.__file_path

    def all(self, cls=None):
        """returns the dictionary __objects"""
        if cls is not None:
            new_dict = {}
            for key, value in self.__objects.items():
                if cls == value.__class__ or cls == value.__class__.__name__:
                    new_dict[key] = value
            return new_dict
        return self.__objects

    def new(self, obj):
        """sets in __objects the obj with key <obj class name>.id"""
        if obj is not None:
            key = obj.__class__.__name__ + "." + obj.id
            self.__objects[key] = obj

    def save(self):
        """serializes __objects to the JSON file (path: __file_path)"""
        json_objects = {}
        for key in self.__objects:
            json_objects[key] = self.__objects[key].to_dict()
        with open(self.__file_path, 'w') as f:
            json.dump(json_objects, f)
        logger.info("saved %d record(s) to %s", len(json_objects),
                    self.__file_path)

    def reload(self, strict=False):
        """
        Deserialize the JSON file into __objects.

        A missing file leaves the storage empty unless `strict` is set.
        Unreadable content raises ValueError naming the file.
        """
        if not os.path.isfile(self.__file_path):
            if strict:
                raise ValueError("no such file: {}".format(self.__file_path))
            return
        try:
            with open(self.__file_path, 'r') as f:
                jo = json.load(f)
            for key in jo:
                cls = classes[jo[key]["__class__"]]
                self.__objects[key] = cls(**jo[key])
        except (ValueError, KeyError, TypeError) as err:
            raise ValueError("cannot read {}: {}".format(self.__file_path,
                                                         err))

    def delete(self, obj=None):
        """delete obj from __objects if it’s inside"""
        if obj is not None:
            key = obj.__class__.__name__ + '.' + obj.id
            if key in self.__objects:
                del self.__objects[key]

    def get(self, cls, id):
        """
        Retrieve an object based on its class and ID.

        Args:
            cls (type): The class (or class name) of the object.
            id (str): The unique identifier of the object.

        Returns:
            object: The matching object, or None if no such object exists.
        """
        if not id or not cls:
            return None
        if isinstance(cls, type):
            cls = cls.__name__
        if cls not in classes.keys():
            return None
        return self.__objects.get("{}.{}".format(cls, id))

    def count(self, cls=None):
        """number of stored objects, optionally of one class only"""
        return len(self.all(cls))

    def first(self, cls):
        """the earliest created object of cls, or None"""
        found = sorted(self.all(cls).values(), key=lambda o: o.created_at)
        return found[0] if found else None
