public int size() { return elementCount; }
