# GeoWeight Tests