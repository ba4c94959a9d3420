# meshes package
