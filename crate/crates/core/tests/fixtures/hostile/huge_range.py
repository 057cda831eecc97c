for _ in range(1000000000):
    Grasp('left')
    Release('left')
