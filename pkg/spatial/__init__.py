# Open-sea fishery: plankton and fish fields, sea current, boat fleet
