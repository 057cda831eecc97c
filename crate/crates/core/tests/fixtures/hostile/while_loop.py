while True:
    Grasp('left')
